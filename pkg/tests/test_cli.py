"""
Tests para la CLI: códigos de salida, ayuda y el pipeline completo
"""
import csv
import json

import pytest

from app.cli import cli, main
from app.config import load_run_config
from app.exceptions import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE
from app.services.cascade_io import parse_cascades, read_labels
from app.services.model_store import load_model


@pytest.fixture
def pipeline(tmp_path, testing_config):
    """Red WS pequeña, dos datasets (IC y LT) y un grupo etiquetado"""
    paths = {
        'net': tmp_path / 'ws.txt',
        'ic': tmp_path / 'ic.txt',
        'lt': tmp_path / 'lt.txt',
        'group': tmp_path / 'group.txt',
    }
    assert main(['gen-net', '--model', 'WS', '--nodes', '100', '--ws-k', '6', '--seed', '3',
                 '--out', str(paths['net'])]) == EXIT_OK
    assert main(['simulate', '--net', str(paths['net']), '--model', 'IC', '--ic-p', '0.3', '--count', '20',
                 '--min-size', '3', '--max-size', '40', '--seed', '4', '--out', str(paths['ic'])]) == EXIT_OK
    assert main(['simulate', '--net', str(paths['net']), '--model', 'LT', '--count', '20',
                 '--min-size', '3', '--max-size', '40', '--seed', '5', '--out', str(paths['lt'])]) == EXIT_OK
    assert main(['build-group', '--source', f"{paths['ic']}:IC", '--source', f"{paths['lt']}:LT",
                 '--per-class', '15', '--seed', '1', '--name', 'WS', '--out', str(paths['group'])]) == EXIT_OK
    paths['labels'] = tmp_path / 'group.txt.labels.csv'
    return paths


class TestAyuda:
    def test_help(self, runner):
        """Test la ayuda lista los comandos del pipeline"""
        result = runner.invoke(cli, ['--help'])
        assert result.exit_code == 0
        for command in ('gen-net', 'simulate', 'import-paths', 'build-group', 'featurize', 'train', 'eval',
                        'experiment'):
            assert command in result.output

    def test_help_de_comando(self, runner):
        """Test la ayuda de gen-net muestra sus parámetros"""
        result = runner.invoke(cli, ['gen-net', '--help'])
        assert result.exit_code == 0
        assert '--ws-beta' in result.output

    def test_help_via_main(self):
        """Test --help termina con código 0"""
        assert main(['--help']) == EXIT_OK

    def test_version(self, runner):
        result = runner.invoke(cli, ['--version'])
        assert '1.0.0' in result.output


class TestCodigosDeSalida:
    def test_opcion_desconocida(self):
        """Test flag inexistente: error de uso"""
        assert main(['gen-net', '--bogus']) == EXIT_USAGE

    def test_falta_opcion_requerida(self):
        """Test simulate sin --net"""
        assert main(['simulate', '--count', '3', '--out', 'x.txt']) == EXIT_USAGE

    def test_configuracion_invalida(self, tmp_path, testing_config):
        """Test WS con k impar: error de configuración"""
        out = tmp_path / 'net.txt'
        assert main(['gen-net', '--model', 'WS', '--nodes', '10', '--ws-k', '3', '--out', str(out)]) == EXIT_USAGE
        assert not out.exists()

    def test_archivo_de_configuracion_invalido(self, tmp_path, testing_config):
        """Test sección desconocida en --config"""
        config = tmp_path / 'c.cfg'
        config.write_text("[nada]\nx = 1\n")
        code = main(['gen-net', '--config', str(config), '--out', str(tmp_path / 'net.txt')])
        assert code == EXIT_USAGE

    def test_red_mal_formada(self, tmp_path, testing_config):
        """Test simulate sobre un archivo de red sin encabezado: fallo de ejecución"""
        net = tmp_path / 'net.txt'
        net.write_text("0 1\n")
        code = main(['simulate', '--net', str(net), '--count', '3', '--out', str(tmp_path / 'c.txt')])
        assert code == EXIT_RUNTIME

    def test_modelo_ilegible(self, tmp_path, pipeline):
        """Test eval con un archivo que no es un modelo"""
        fake = tmp_path / 'fake.npz'
        fake.write_text("no soy un modelo")
        code = main(['eval', '--model', str(fake), '--cascades', str(pipeline['group']),
                     '--labels', str(pipeline['labels']), '--out', str(tmp_path / 'r.json')])
        assert code == EXIT_RUNTIME

    def test_fuente_sin_clase(self, tmp_path, pipeline):
        """Test --source sin ':CLASE'"""
        code = main(['build-group', '--source', str(pipeline['ic']), '--source', f"{pipeline['lt']}:LT",
                     '--per-class', '2', '--out', str(tmp_path / 'g.txt')])
        assert code == EXIT_USAGE


class TestPipeline:
    def test_salidas_y_procedencia(self, pipeline):
        """Test cada salida tiene su configuración resuelta al lado"""
        for key in ('net', 'ic', 'lt', 'group'):
            provenance = pipeline[key].with_name(pipeline[key].name + '.run.cfg')
            assert provenance.exists()

        config = load_run_config(pipeline['net'].with_name('ws.txt.run.cfg'))
        assert config.seed == 3
        assert config.network.ws_k == 6
        assert config.run.command == 'cascadelab gen-net'

    def test_relanzar_desde_procedencia(self, tmp_path, pipeline):
        """Test relanzar gen-net con su run.cfg escribe el mismo archivo"""
        first = pipeline['net'].with_name('ws.txt.run.cfg')
        again = tmp_path / 'again.txt'
        assert main(['gen-net', '--config', str(first), '--out', str(again)]) == EXIT_OK

        assert again.with_name('again.txt.run.cfg').read_text() == first.read_text()
        assert again.read_text() == pipeline['net'].read_text()

    def test_grupo(self, pipeline):
        """Test el grupo tiene 15 cascadas por clase con ids <clase>/<id>"""
        cascades = parse_cascades(pipeline['group'])
        labels = read_labels(pipeline['labels'])

        assert len(cascades) == 30
        assert sorted(labels.values()).count('IC') == 15
        for cascade in cascades:
            assert cascade.cascade_id.startswith(labels[cascade.cascade_id] + '/')

    def test_featurize(self, tmp_path, pipeline):
        """Test una fila de atributos por cascada con su clase"""
        out = tmp_path / 'features.csv'
        assert main(['featurize', '--cascades', str(pipeline['group']), '--labels', str(pipeline['labels']),
                     '--out', str(out)]) == EXIT_OK

        with open(out, newline='') as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 30
        assert {row['class_name'] for row in rows} == {'IC', 'LT'}

    @pytest.mark.parametrize('algo', ['rf', 'gbt', 'gcn'])
    def test_train_y_eval(self, tmp_path, pipeline, algo):
        """Test entrenar, guardar y evaluar cada línea base"""
        model_path = tmp_path / f"{algo}.npz"
        report_path = tmp_path / f"{algo}.json"
        assert main(['train', '--cascades', str(pipeline['group']), '--labels', str(pipeline['labels']),
                     '--algo', algo, '--seed', '2', '--out', str(model_path)]) == EXIT_OK
        assert main(['eval', '--model', str(model_path), '--cascades', str(pipeline['group']),
                     '--labels', str(pipeline['labels']), '--out', str(report_path)]) == EXIT_OK

        stored = load_model(model_path)
        assert stored.classes == ['IC', 'LT']
        assert len(stored.header['train_ids']) + len(stored.header['validation_ids']) == 30

        report = json.loads(report_path.read_text())
        assert report['algo'] == algo
        assert 0 <= report['macro_f1'] <= 1
        assert sum(map(sum, report['confusion_matrix'])) == 30

    def test_train_contrastivo_con_externo(self, tmp_path, pipeline):
        """Test contrastivo con pre-entrenamiento mixto sobre cascadas externas"""
        model_path = tmp_path / 'contrastive.npz'
        code = main(['train', '--cascades', str(pipeline['group']), '--labels', str(pipeline['labels']),
                     '--algo', 'contrastive', '--unlabeled', str(pipeline['ic']), '--pretrain-source', 'mixed',
                     '--out', str(model_path)])
        assert code == EXIT_OK
        assert load_model(model_path).model.phase == 'distilled'

    def test_import_paths(self, tmp_path):
        """Test import-paths convierte rutas reales al formato del laboratorio"""
        source = tmp_path / 'paths.txt'
        source.write_text("c1\t1\t0\t3\t1:0 1/2:5 1/3:7\n")
        out = tmp_path / 'real.txt'
        assert main(['import-paths', '--input', str(source), '--out', str(out)]) == EXIT_OK
        [cascade] = parse_cascades(out)
        assert [e.node for e in cascade.events] == [1, 2, 3]

    def test_import_paths_guarda_procedencia(self, tmp_path, testing_config):
        """Test import-paths deja la configuración resuelta junto a la salida"""
        source = tmp_path / 'paths.txt'
        source.write_text("c1\t1\t0\t2\t1:0 1/2:5\n")
        out = tmp_path / 'real.txt'
        assert main(['import-paths', '--input', str(source), '--seed', '9', '--out', str(out)]) == EXIT_OK

        config = load_run_config(tmp_path / 'real.txt.run.cfg')
        assert config.seed == 9
        assert config.run.command == 'cascadelab import-paths'


class TestExperimentos:
    def test_tables_pasa_la_semilla(self, tmp_path, testing_config, mocker):
        """Test experiment tables resuelve la configuración y delega en run_tables"""
        run_tables = mocker.patch('app.commands.experiments.run_tables', return_value=[])
        code = main(['experiment', 'tables', '--seed', '5', '--out', str(tmp_path / 'out'), '--pdf'])

        assert code == EXIT_OK
        run_config = run_tables.call_args.args[0]
        assert run_config.seed == 5
        assert run_config.run.preset == 'testing'
        assert run_tables.call_args.kwargs['pdf'] is True

    def test_label_fraction_con_config(self, tmp_path, testing_config, mocker):
        """Test experiment label-fraction lee las fracciones del archivo"""
        run_label_fraction = mocker.patch('app.commands.experiments.run_label_fraction', return_value=[])
        config = tmp_path / 'c.cfg'
        config.write_text("[label_fraction]\nfractions = 0.1, 0.2, 1.0\n")
        code = main(['experiment', 'label-fraction', '--config', str(config), '--out', str(tmp_path / 'out'), '--pdf'])

        assert code == EXIT_OK
        assert run_label_fraction.call_args.args[0].label_fraction.fractions == [0.1, 0.2, 1.0]
        assert run_label_fraction.call_args.kwargs['pdf'] is True
