"""
Tests para el contenedor de modelos
"""
import json

import numpy as np
import pytest
import torch

from app.exceptions import ModelFormatError
from app.models.specs import Algorithm, AugmentConfig, ContrastiveSpec, ObservationWindow, TrainSpec
from app.services.contrastive_learner import PHASE_DISTILLED, distill, finetune, new_encoder, pretrain
from app.services.gcn_model import train_gcn
from app.services.graph_nn import prepare_graphs
from app.services.model_store import HEADER_KEY, load_model, save_model
from app.services.tree_models import train_gbt, train_random_forest
from app.utils.seeding import make_rng

SMALL = ContrastiveSpec(batch_size=4, pretrain_epochs=1, finetune_epochs=1, distill_epochs=1,
                        finetune_batch_size=4, hidden_dim=8, embedding_dim=8, projection_dim=4, seed=1)


def _features(seed=0):
    rng = make_rng(seed)
    y = np.repeat([0, 1], 15)
    X = y[:, None] * 2.0 + rng.random((30, 4))
    return X, y


class TestArboles:
    def test_random_forest(self, tmp_path):
        """Test el bosque cargado predice exactamente igual"""
        X, y = _features()
        model = train_random_forest(X, y, TrainSpec.defaults_for('rf', n_trees=6, seed=2))
        path = tmp_path / 'rf.npz'
        save_model(model, path, classes=['IC', 'LT'])

        stored = load_model(path)
        assert stored.classes == ['IC', 'LT']
        assert stored.header['algo'] == 'rf'
        assert np.array_equal(stored.model.predict_proba(X), model.predict_proba(X))

    def test_gbt(self, tmp_path):
        """Test el boosting cargado conserva la ronda seleccionada"""
        X, y = _features()
        X_val, y_val = _features(1)
        model = train_gbt(X, y, X_val, y_val, TrainSpec.defaults_for(Algorithm.GBT, max_rounds=20))
        path = tmp_path / 'gbt.npz'
        save_model(model, path)

        loaded = load_model(path).model
        assert loaded.best_round == model.best_round
        assert np.array_equal(loaded.predict_proba(X_val), model.predict_proba(X_val))


class TestRedes:
    def test_gcn(self, tmp_path, two_class_graphs):
        """Test la GCN cargada da las mismas probabilidades"""
        items = prepare_graphs(two_class_graphs, ObservationWindow())
        model = train_gcn(items, items, TrainSpec.defaults_for('gcn', epochs=2, hidden=6), n_classes=2)
        path = tmp_path / 'gcn.npz'
        save_model(model, path, classes=['chain', 'star'], extra={'test_ids': ['a', 'b']})

        stored = load_model(path)
        assert stored.header['test_ids'] == ['a', 'b']
        assert stored.model.best_epoch == model.best_epoch
        assert np.array_equal(stored.model.predict_proba(items), model.predict_proba(items))

    def test_codificador_preentrenado(self, tmp_path, two_class_graphs):
        """Test el codificador pre-entrenado se guarda con su cabeza de proyección"""
        encoder = pretrain(two_class_graphs, SMALL, AugmentConfig())
        path = tmp_path / 'encoder.npz'
        save_model(encoder, path)

        stored = load_model(path)
        assert stored.header['phase'] == 'pretrained'
        for a, b in zip(encoder.state_dict().values(), stored.model.state_dict().values()):
            assert torch.equal(a, b)

    def test_destilado(self, tmp_path, two_class_graphs):
        """Test el estudiante destilado conserva fase y predicciones"""
        items = prepare_graphs(two_class_graphs, ObservationWindow())
        teacher = finetune(new_encoder(SMALL, in_dim=3), items, items, SMALL, n_classes=2)
        student = distill(teacher, items, items[:4], items, SMALL, 2)
        path = tmp_path / 'student.npz'
        save_model(student, path)

        stored = load_model(path)
        assert stored.model.phase == PHASE_DISTILLED
        assert stored.header['hyperparameters']['student_init'] == 'teacher'
        assert np.array_equal(stored.model.predict_proba(items), student.predict_proba(items))


class TestErrores:
    def test_tipo_no_soportado(self, tmp_path):
        """Test guardar un objeto que no es modelo"""
        with pytest.raises(ModelFormatError):
            save_model(object(), tmp_path / 'x.npz')

    def test_archivo_inexistente(self, tmp_path):
        """Test cargar una ruta que no existe"""
        with pytest.raises(ModelFormatError):
            load_model(tmp_path / 'nada.npz')

    def test_sin_encabezado(self, tmp_path):
        """Test un .npz sin encabezado no es un modelo"""
        path = tmp_path / 'raw.npz'
        np.savez(path, a=np.zeros(3))
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_version_distinta(self, tmp_path):
        """Test una versión de formato desconocida se rechaza"""
        X, y = _features()
        path = tmp_path / 'rf.npz'
        save_model(train_random_forest(X, y, TrainSpec.defaults_for('rf', n_trees=2)), path)
        with np.load(path) as data:
            arrays = {key: data[key] for key in data.files}
        header = json.loads(str(arrays[HEADER_KEY]))
        header['format_version'] = 99
        arrays[HEADER_KEY] = np.array(json.dumps(header))
        np.savez(path, **arrays)

        with pytest.raises(ModelFormatError, match='versión'):
            load_model(path)

    def test_parametros_incompletos(self, tmp_path, two_class_graphs):
        """Test faltan pesos de la GCN"""
        items = prepare_graphs(two_class_graphs, ObservationWindow())
        path = tmp_path / 'gcn.npz'
        save_model(train_gcn(items, items, TrainSpec.defaults_for('gcn', epochs=1, hidden=4), 2), path)
        with np.load(path) as data:
            arrays = {key: data[key] for key in data.files if key != 'param/head.bias'}
        np.savez(path, **arrays)

        with pytest.raises(ModelFormatError):
            load_model(path)
