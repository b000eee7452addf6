"""
Tests para el generador de redes sintéticas
"""
import numpy as np
import pytest

from app.exceptions import CascadeParseError, GenerationFailureError, InvalidConfigError
from app.models.specs import NetGenConfig, NetworkModel, build_model
from app.services.network_generator import (
    generate_ba, generate_lfr, generate_network, generate_networks, generate_ws, mixing_fraction,
    read_network, write_network,
)


def _config(**values):
    return build_model(NetGenConfig, **values)


class TestBarabasiAlbert:
    def test_numero_de_aristas(self):
        """Test BA: (n - m) * m aristas sin lazos ni duplicados"""
        config = _config(model=NetworkModel.BA, node_count=300, ba_m=4, seed=7)
        network = generate_ba(config)

        # (300 - 4) * 4 = 1184
        assert network.edge_count == 1184
        network.check_invariants()

    def test_grado_minimo(self):
        """Test cada nodo agregado tiene al menos m vecinos"""
        network = generate_ba(_config(model=NetworkModel.BA, node_count=200, ba_m=3, seed=1))
        assert network.degrees[3:].min() >= 3

    def test_determinista_por_semilla(self):
        """Test misma semilla, misma red; semilla distinta, otra red"""
        config = _config(model=NetworkModel.BA, node_count=150, ba_m=2, seed=11)
        assert generate_ba(config) == generate_ba(config)
        assert generate_ba(config) != generate_ba(config.model_copy(update={'seed': 12}))

    def test_m_mayor_que_nodos(self):
        """Test ba_m >= node_count es un error de configuración"""
        with pytest.raises(InvalidConfigError):
            generate_ba(_config(model=NetworkModel.BA, node_count=5, ba_m=5))

    def test_modelo_equivocado(self):
        """Test generate_ba rechaza una configuración WS"""
        with pytest.raises(InvalidConfigError):
            generate_ba(_config(model=NetworkModel.WS, node_count=50, ws_k=4))


class TestWattsStrogatz:
    def test_numero_de_aristas(self):
        """Test WS: n * k / 2 aristas para cualquier beta"""
        for beta in (0.0, 0.1, 1.0):
            network = generate_ws(_config(model=NetworkModel.WS, node_count=200, ws_k=6, ws_beta=beta, seed=3))
            assert network.edge_count == 600

    def test_anillo_sin_recableado(self):
        """Test beta = 0 deja el anillo regular"""
        network = generate_ws(_config(model=NetworkModel.WS, node_count=20, ws_k=4, ws_beta=0.0))
        assert set(network.degrees.tolist()) == {4}
        assert (0, 1) in network.edges and (0, 2) in network.edges and (0, 18) in network.edges

    def test_k_impar(self):
        """Test ws_k debe ser par"""
        with pytest.raises(InvalidConfigError):
            generate_ws(_config(model=NetworkModel.WS, node_count=20, ws_k=5))


class TestLFR:
    def _lfr(self, **overrides):
        values = dict(
            model=NetworkModel.LFR, node_count=500, lfr_avg_deg=10, lfr_max_deg=40,
            lfr_min_comm=50, lfr_max_comm=150, lfr_mu=0.1, seed=5,
        )
        values.update(overrides)
        return _config(**values)

    def test_comunidades_y_mezcla(self):
        """Test comunidades dentro de [min, max] y mezcla cercana a mu"""
        network = generate_lfr(self._lfr())
        network.check_invariants()

        sizes = np.bincount(np.asarray(network.communities))
        sizes = sizes[sizes > 0]
        assert sizes.sum() == 500
        assert sizes.min() >= 50 and sizes.max() <= 150
        assert mixing_fraction(network) < 0.25

    def test_grado_medio(self):
        """Test el grado medio queda cerca de lfr_avg_deg"""
        network = generate_lfr(self._lfr())
        assert abs(network.degrees.mean() - 10) < 3
        assert network.degrees.max() <= 40

    def test_particion_imposible(self):
        """Test comunidades que no pueden sumar n agotan las iteraciones"""
        config = self._lfr(lfr_min_comm=300, lfr_max_comm=300, lfr_max_iters=5)
        with pytest.raises(GenerationFailureError) as excinfo:
            generate_lfr(config)
        assert excinfo.value.iterations == 5


class TestDespachoYArchivos:
    def test_generate_network_despacha(self):
        """Test generate_network usa el generador del modelo"""
        config = _config(model=NetworkModel.WS, node_count=30, ws_k=4, seed=2)
        assert generate_network(config) == generate_ws(config)

    def test_hilos_no_cambian_resultado(self):
        """Test generate_networks da lo mismo con 1 y 3 hilos"""
        configs = [
            _config(model=NetworkModel.BA, node_count=100, ba_m=2, seed=1),
            _config(model=NetworkModel.WS, node_count=100, ws_k=4, seed=2),
            _config(model=NetworkModel.BA, node_count=100, ba_m=3, seed=3),
        ]
        assert generate_networks(configs, threads=1) == generate_networks(configs, threads=3)

    def test_escritura_y_lectura(self, tmp_path):
        """Test write_network / read_network conservan nodos y aristas"""
        network = generate_ba(_config(model=NetworkModel.BA, node_count=60, ba_m=2, seed=9))
        path = tmp_path / 'ba.net'
        write_network(network, path)

        lines = path.read_text().splitlines()
        assert lines[0] == '# nodes=60'
        assert len(lines) == 1 + network.edge_count
        assert read_network(path) == network

    def test_lectura_sin_encabezado(self, tmp_path):
        """Test un archivo sin '# nodes=' es un error de formato"""
        path = tmp_path / 'bad.net'
        path.write_text('0 1\n')
        with pytest.raises(CascadeParseError):
            read_network(path)

    def test_lectura_arista_mal_formada(self, tmp_path):
        """Test una arista con tres campos indica la línea"""
        path = tmp_path / 'bad.net'
        path.write_text('# nodes=3\n0 1\n1 2 3\n')
        with pytest.raises(CascadeParseError) as excinfo:
            read_network(path)
        assert excinfo.value.line_number == 3
