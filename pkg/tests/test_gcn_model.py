"""
Tests para las piezas de redes sobre grafos y la GCN
"""
import numpy as np
import pytest
import torch
from torch.autograd import gradcheck
from torch.func import functional_call

from app.exceptions import InvalidInputError
from app.models.specs import Algorithm, ObservationWindow, TrainSpec
from app.services.gcn_model import GcnModel, batch_loss, train_gcn
from app.services.graph_nn import (
    DTYPE, BestEpochTracker, graph_input, make_batch, mean_pool, minibatches, normalized_adjacency,
    prepare_graphs,
)
from app.utils.seeding import make_rng


def _loss_gradcheck(model, items):
    """Gradiente analítico de la pérdida contra diferencias centrales (eps = 1e-4)"""
    batch = make_batch(items)
    names = [name for name, _ in model.named_parameters()]
    params = tuple(p.detach().clone().requires_grad_(True) for _, p in model.named_parameters())

    def loss(*tensors):
        logits = functional_call(model, dict(zip(names, tensors)), (batch,))
        return torch.nn.functional.cross_entropy(logits, batch.labels)

    return gradcheck(loss, params, eps=1e-4, atol=1e-6, rtol=1e-3)


class TestAdyacencia:
    def test_una_arista(self):
        """Test Â de una arista: grados con lazo 2, todos los valores 1/2"""
        rows, cols, values = normalized_adjacency(2, [(0, 1)])
        dense = np.zeros((2, 2))
        dense[rows, cols] = values
        assert dense.tolist() == pytest.approx([[0.5, 0.5], [0.5, 0.5]])

    def test_simetrica(self):
        """Test Â de una estrella es simétrica"""
        rows, cols, values = normalized_adjacency(4, [(0, 1), (0, 2), (0, 3)])
        dense = np.zeros((4, 4))
        dense[rows, cols] = values
        assert np.allclose(dense, dense.T)
        assert dense[0, 0] == pytest.approx(1 / 4)
        assert dense[0, 1] == pytest.approx(1 / np.sqrt(4 * 2))


class TestLotes:
    def test_diagonal_por_bloques(self):
        """Test dos grafos apilados: índices desplazados y sin aristas cruzadas"""
        first = graph_input(np.ones((3, 3)), [(0, 1), (1, 2)], 'a', 0)
        second = graph_input(np.ones((2, 3)), [(0, 1)], 'b', 1)
        batch = make_batch([first, second])

        dense = batch.adjacency.to_dense()
        assert dense.shape == (5, 5)
        assert dense[:3, 3:].abs().sum() == 0
        assert batch.graph_index.tolist() == [0, 0, 0, 1, 1]
        assert batch.labels.tolist() == [0, 1]
        assert batch.features.dtype == DTYPE

    def test_mean_pool(self):
        """Test el pooling promedia las filas de cada grafo"""
        h = torch.tensor([[1.0], [3.0], [10.0]], dtype=DTYPE)
        pooled = mean_pool(h, torch.tensor([0, 0, 1]), 2)
        assert pooled.flatten().tolist() == [2.0, 10.0]

    def test_lote_vacio(self):
        """Test un lote vacío es un error"""
        with pytest.raises(InvalidInputError):
            make_batch([])

    def test_minibatches(self):
        """Test los lotes cubren todos los índices una vez"""
        batches = minibatches(11, 4, make_rng(0))
        assert [len(b) for b in batches] == [4, 4, 3]
        assert sorted(np.concatenate(batches).tolist()) == list(range(11))


class TestGcn:
    def test_prepare_graphs(self, two_class_graphs):
        """Test entradas con 3 atributos por nodo y la etiqueta del grafo"""
        items = prepare_graphs(two_class_graphs, ObservationWindow())
        assert items[0].features.shape == (two_class_graphs[0].size, 3)
        assert items[0].label == 0 and items[-1].label == 1

    def test_forma_de_salida(self, two_class_graphs):
        """Test probabilidades (n, K) con filas que suman 1"""
        items = prepare_graphs(two_class_graphs, ObservationWindow())
        model = GcnModel(3, 18, 2, seed=1)
        proba = model.predict_proba(items)

        assert proba.shape == (len(items), 2)
        assert np.allclose(proba.sum(axis=1), 1.0)

    def test_dimension_incorrecta(self, two_class_graphs):
        """Test atributos incompatibles con la primera capa"""
        model = GcnModel(4, 8, 2)
        with pytest.raises(InvalidInputError):
            model.predict(prepare_graphs(two_class_graphs[:2], ObservationWindow()))

    def test_gradiente_diferencias_finitas(self, two_class_graphs):
        """Test gradiente de la pérdida contra diferencias centrales en 10 inicializaciones"""
        items = prepare_graphs([two_class_graphs[0], two_class_graphs[5], two_class_graphs[12]], ObservationWindow())
        for seed in range(10):
            model = GcnModel(3, 4, 2, seed=seed)
            assert _loss_gradcheck(model, items)

    def test_entrenamiento(self, two_class_graphs):
        """Test entrenar selecciona la mejor época por macro-F1 de validación"""
        items = prepare_graphs(two_class_graphs, ObservationWindow())
        spec = TrainSpec.defaults_for(Algorithm.GCN, epochs=3, seed=2)
        model = train_gcn(items, items, spec, n_classes=2)

        assert 1 <= model.best_epoch <= 3
        assert len(model.val_scores) == 3
        assert model.val_scores[model.best_epoch - 1] == max(model.val_scores)
        assert model.hyperparameters['in_dim'] == 3
        assert not model.training

    def test_determinista(self, two_class_graphs):
        """Test misma semilla, mismos parámetros"""
        items = prepare_graphs(two_class_graphs, ObservationWindow())
        spec = TrainSpec.defaults_for(Algorithm.GCN, epochs=2, seed=5)
        first = train_gcn(items, items, spec, 2)
        second = train_gcn(items, items, spec, 2)
        for a, b in zip(first.parameters(), second.parameters()):
            assert torch.equal(a, b)

    def test_sin_etiquetas(self, two_class_graphs):
        """Test la GCN requiere grafos etiquetados"""
        items = [item._replace(label=-1) for item in prepare_graphs(two_class_graphs, ObservationWindow())]
        with pytest.raises(InvalidInputError):
            train_gcn(items, [], TrainSpec.defaults_for(Algorithm.GCN, epochs=1))

    def test_batch_loss_finita(self, two_class_graphs):
        """Test la pérdida de un lote es finita y positiva"""
        items = prepare_graphs(two_class_graphs[:4], ObservationWindow())
        loss = batch_loss(GcnModel(3, 18, 2), items)
        assert torch.isfinite(loss) and loss.item() > 0


class TestBestEpochTracker:
    def test_empates_prefieren_la_ultima(self, two_class_graphs):
        """Test un empate de macro-F1 conserva la época más reciente"""
        items = prepare_graphs(two_class_graphs[:4], ObservationWindow())
        model = GcnModel(3, 4, 2)
        tracker = BestEpochTracker(2)
        tracker.update(model, items, 1)
        tracker.update(model, items, 2)

        assert tracker.best_epoch == 2
        assert tracker.scores[0] == tracker.scores[1]
