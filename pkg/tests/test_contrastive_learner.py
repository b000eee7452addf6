"""
Tests para el aprendizaje contrastivo: aumento, NT-Xent, ajuste fino y destilación
"""
import math

import numpy as np
import pytest
import torch
from torch.autograd import gradcheck
from torch.func import functional_call

from app.exceptions import DegenerateModelError, InvalidInputError
from app.models.specs import AugmentConfig, ContrastiveSpec, ObservationWindow
from app.services.contrastive_learner import (
    PHASE_DISTILLED, PHASE_FINETUNED, augment, distill, distillation_loss, finetune, new_encoder, nt_xent_loss,
    pretrain,
)
from app.services.graph_nn import DTYPE, make_batch, prepare_graphs
from app.utils.seeding import make_rng
from tests.conftest import make_graph

SMALL = dict(batch_size=4, pretrain_epochs=1, finetune_epochs=2, distill_epochs=2, finetune_batch_size=4,
             hidden_dim=8, embedding_dim=8, projection_dim=4, seed=3)


def _tree(rng, n):
    """Árbol aleatorio con tiempos crecientes"""
    events = [(0, None, 0.0)]
    for v in range(1, n):
        parent = int(rng.integers(v))
        events.append((v, parent, float(v)))
    return make_graph(f"t{n}", events)


class TestAugment:
    def test_identidad(self, star_graph):
        """Test tasas en cero devuelven el mismo grafo"""
        cfg = AugmentConfig(leaf_drop_rate=0, node_add_rate=0, time_jitter=0)
        view = augment(star_graph, cfg)

        assert view.nodes == star_graph.nodes
        assert view.edges == star_graph.edges
        assert view.node_times == star_graph.node_times

    def test_descartar_todas_las_hojas(self, star_graph):
        """Test leaf_drop_rate = 1 en una estrella deja solo la raíz"""
        cfg = AugmentConfig(leaf_drop_rate=1, node_add_rate=0, time_jitter=0)
        view = augment(star_graph, cfg)
        assert view.nodes == (0,)
        assert view.edges == ()

    def test_cadena_pierde_solo_la_punta(self, path_graph):
        """Test en una cadena la única hoja es el último nodo"""
        cfg = AugmentConfig(leaf_drop_rate=1, node_add_rate=0, time_jitter=0)
        assert augment(path_graph, cfg).nodes == (0, 1)

    def test_invariantes_de_arbol(self):
        """Test 200 vistas aleatorias siguen siendo árboles con la misma raíz"""
        rng = make_rng(17)
        cfg = AugmentConfig(leaf_drop_rate=0.3, node_add_rate=0.3, time_jitter=0.2)
        for i in range(200):
            graph = _tree(rng, int(rng.integers(1, 15)))
            view = augment(graph, cfg, make_rng(i))
            view.check_invariants()
            assert view.root == graph.root
            assert view.node_times[view.root] == 0.0

    def test_nodos_nuevos_con_ids_nuevos(self, path_graph):
        """Test node_add_rate = 1 agrega una hoja por nodo con ids no usados"""
        cfg = AugmentConfig(leaf_drop_rate=0, node_add_rate=1, time_jitter=0)
        view = augment(path_graph, cfg, make_rng(0))

        assert view.size == 6
        assert set(view.nodes) - set(path_graph.nodes) == {3, 4, 5}

    def test_configuracion_por_defecto_en_grafo_grande(self):
        """Test tasas por defecto sobre 50 nodos: varias hojas nuevas y árbol válido"""
        rng = make_rng(23)
        added = []
        for i in range(20):
            graph = _tree(rng, 50)
            view = augment(graph, AugmentConfig(), make_rng(i))
            view.check_invariants()
            added.append(len(set(view.nodes) - set(graph.nodes)))
        assert max(added) >= 2

    def test_padres_de_hojas_nuevas_son_supervivientes(self):
        """Test con node_add_rate = 1 cada hoja nueva cuelga de un nodo original"""
        graph = _tree(make_rng(5), 50)
        cfg = AugmentConfig(leaf_drop_rate=0, node_add_rate=1, time_jitter=0)
        view = augment(graph, cfg, make_rng(1))

        new_nodes = set(view.nodes) - set(graph.nodes)
        assert len(new_nodes) == 50
        parents = {parent for parent, child in view.edges if child in new_nodes}
        assert parents <= set(graph.nodes)

    def test_determinista(self, star_graph):
        """Test la misma semilla da la misma vista"""
        cfg = AugmentConfig(seed=4)
        first, second = augment(star_graph, cfg), augment(star_graph, cfg)
        assert first.nodes == second.nodes
        assert first.node_times == second.node_times


class TestNtXent:
    def test_pares_ortogonales(self):
        """Test N=2 con pares e1/e1 y e2/e2, tau = 0.5: -ln(e^2 / (e^2 + 2))"""
        e1 = [1.0, 0.0]
        e2 = [0.0, 1.0]
        z = torch.tensor([e1, e2, e1, e2], dtype=DTYPE)
        expected = -math.log(math.exp(2) / (math.exp(2) + 2))

        assert nt_xent_loss(z, 0.5).item() == pytest.approx(expected, abs=1e-4)
        assert expected == pytest.approx(0.2395, abs=1e-4)

    @pytest.mark.parametrize('n', [2, 3, 8])
    def test_proyecciones_identicas(self, n):
        """Test todas las proyecciones iguales: ln(2N - 1)"""
        z = torch.ones((2 * n, 5), dtype=DTYPE)
        assert nt_xent_loss(z, 0.5).item() == pytest.approx(math.log(2 * n - 1), abs=1e-10)

    def test_invariante_a_escala(self):
        """Test la pérdida usa similitud coseno"""
        z = torch.from_numpy(make_rng(1).normal(size=(6, 4)))
        assert nt_xent_loss(z, 0.5).item() == pytest.approx(nt_xent_loss(3.0 * z, 0.5).item())

    def test_gradiente_diferencias_finitas(self):
        """Test gradiente de NT-Xent contra diferencias centrales en 10 sorteos"""
        for seed in range(10):
            z = torch.from_numpy(make_rng(seed).normal(size=(6, 4))).requires_grad_(True)
            assert gradcheck(lambda t: nt_xent_loss(t, 0.5), (z,), eps=1e-4, atol=1e-6, rtol=1e-3)

    def test_n_menor_que_dos(self):
        """Test N = 1 no tiene negativos"""
        with pytest.raises(InvalidInputError):
            nt_xent_loss(torch.ones((2, 3), dtype=DTYPE), 0.5)

    def test_norma_cero(self):
        """Test una proyección nula es un error"""
        z = torch.ones((4, 3), dtype=DTYPE)
        z[2] = 0
        with pytest.raises(InvalidInputError):
            nt_xent_loss(z, 0.5)


class TestEncoder:
    def test_dimensiones(self, two_class_graphs):
        """Test embedding 64 y proyección 32 por defecto"""
        encoder = new_encoder(ContrastiveSpec(), in_dim=3)
        batch = make_batch(prepare_graphs(two_class_graphs[:3], ObservationWindow()))

        assert encoder.embed(batch).shape == (3, 64)
        assert encoder(batch).shape == (3, 32)

    def test_gradiente_de_la_perdida_completa(self, two_class_graphs):
        """Test gradiente de NT-Xent sobre el codificador contra diferencias centrales"""
        graphs = [two_class_graphs[0], two_class_graphs[11]]
        cfg = AugmentConfig(leaf_drop_rate=0.2, node_add_rate=0.2, time_jitter=0.1)
        rng = make_rng(5)
        views = [augment(g, cfg, rng) for g in graphs] + [augment(g, cfg, rng) for g in graphs]
        batch = make_batch(prepare_graphs(views, ObservationWindow()))

        checked = 0
        for seed in range(5):
            encoder = new_encoder(ContrastiveSpec(hidden_dim=8, embedding_dim=8, projection_dim=4), in_dim=3, seed=seed)
            with torch.no_grad():
                if (encoder(batch).norm(dim=1) == 0).any():
                    # Inicialización con ReLU muertas: NT-Xent no está definida
                    continue
            names = [name for name, _ in encoder.named_parameters()]
            params = tuple(p.detach().clone().requires_grad_(True) for _, p in encoder.named_parameters())

            def loss(*tensors):
                return nt_xent_loss(functional_call(encoder, dict(zip(names, tensors)), (batch,)), 0.5)

            assert gradcheck(loss, params, eps=1e-4, atol=1e-6, rtol=1e-3)
            checked += 1
        assert checked > 0


class TestPipeline:
    @pytest.fixture
    def spec(self):
        return ContrastiveSpec(**SMALL)

    @pytest.fixture
    def inputs(self, two_class_graphs):
        return prepare_graphs(two_class_graphs, ObservationWindow())

    def test_pretrain(self, two_class_graphs, spec):
        """Test el pre-entrenamiento registra una pérdida finita por lote"""
        encoder = pretrain(two_class_graphs, spec, AugmentConfig())

        assert len(encoder.losses) == 5
        assert all(np.isfinite(encoder.losses))
        assert encoder.hyperparameters['in_dim'] == 3

    def test_pretrain_pocos_grafos(self, two_class_graphs, spec):
        """Test menos grafos que batch_size es un error"""
        with pytest.raises(InvalidInputError):
            pretrain(two_class_graphs[:3], spec, AugmentConfig())

    def test_finetune(self, two_class_graphs, inputs, spec):
        """Test el ajuste fino no modifica el codificador original"""
        encoder = pretrain(two_class_graphs, spec, AugmentConfig())
        before = [p.clone() for p in encoder.parameters()]
        model = finetune(encoder, inputs, inputs, spec, n_classes=2)

        assert model.phase == PHASE_FINETUNED
        assert model.predict_proba(inputs).shape == (20, 2)
        assert 1 <= model.best_epoch <= 2
        for a, b in zip(before, encoder.parameters()):
            assert torch.equal(a, b)

    def test_finetune_una_clase(self, two_class_graphs, inputs, spec):
        """Test ajuste fino con una sola clase es degenerado"""
        encoder = new_encoder(spec, in_dim=3)
        with pytest.raises(DegenerateModelError):
            finetune(encoder, inputs[:10], [], spec)

    def test_distill(self, two_class_graphs, inputs, spec):
        """Test destilación con estudiante desde el maestro y aleatorio"""
        encoder = pretrain(two_class_graphs, spec, AugmentConfig())
        teacher = finetune(encoder, inputs, inputs, spec, n_classes=2)
        unlabeled = inputs[:6]

        for student_init in ('teacher', 'random'):
            student = distill(teacher, inputs, unlabeled, inputs,
                              spec.model_copy(update={'student_init': student_init}), 2)
            assert student.phase == PHASE_DISTILLED
            assert student.hyperparameters['student_init'] == student_init
            assert student.predict(inputs).shape == (20,)
        assert teacher.phase == PHASE_FINETUNED


class TestDistillationLoss:
    def test_alpha_uno_es_entropia_cruzada(self):
        """Test alpha = 1: solo el término supervisado"""
        student = torch.tensor([[2.0, 0.0], [0.0, 1.0]], dtype=DTYPE)
        teacher = torch.tensor([[0.0, 3.0], [1.0, 0.0]], dtype=DTYPE)
        labels = torch.tensor([0, 1])
        expected = torch.nn.functional.cross_entropy(student, labels)
        assert distillation_loss(student, teacher, labels, 1.0, 2.0).item() == pytest.approx(expected.item())

    def test_maestro_igual_al_estudiante(self):
        """Test KL nula cuando los logits coinciden"""
        logits = torch.tensor([[1.0, -1.0], [0.5, 0.2]], dtype=DTYPE)
        labels = torch.tensor([-1, -1])
        assert distillation_loss(logits, logits, labels, 0.5, 2.0).item() == pytest.approx(0.0, abs=1e-12)

    def test_sin_etiquetas_solo_kl(self):
        """Test lotes sin etiquetas usan solo el término KL (escalado por T^2)"""
        student = torch.tensor([[0.0, 0.0]], dtype=DTYPE)
        teacher = torch.tensor([[0.0, 2.0 * math.log(3.0)]], dtype=DTYPE)
        # maestro con T = 2: (1/4, 3/4); estudiante uniforme
        kl = 0.25 * math.log(0.25 / 0.5) + 0.75 * math.log(0.75 / 0.5)
        value = distillation_loss(student, teacher, torch.tensor([-1]), 0.5, 2.0).item()
        assert value == pytest.approx(0.5 * 4.0 * kl)
