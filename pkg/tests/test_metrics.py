"""
Tests para las métricas de clasificación
"""
import numpy as np
import pytest

from app.exceptions import InvalidInputError
from app.models.cascade import Label
from app.services.metrics import confusion_matrix, f1_from_confusion, macro_f1, macro_f1_score, report_from_pairs
from app.utils.seeding import make_rng


def _brute_force_macro_f1(y_true, y_pred, k):
    scores = []
    for c in range(k):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return sum(scores) / k


class TestMacroF1:
    def test_ejemplo_conocido(self):
        """Test matriz [[2, 0], [1, 1]]: F1 = (0.8, 2/3), macro = 11/15"""
        y_true = [0, 0, 1, 1]
        y_pred = [0, 0, 0, 1]
        report = macro_f1(y_true, y_pred, ['IC', 'LT'], group='WS', algo='rf', seed=3)

        assert report.confusion_matrix == [[2, 0], [1, 1]]
        assert report.per_class_f1['IC'] == pytest.approx(0.8)
        assert report.per_class_f1['LT'] == pytest.approx(2 / 3)
        assert report.macro_f1 == pytest.approx(11 / 15)
        assert report.group == 'WS' and report.algo == 'rf' and report.seed == 3

    def test_clase_nunca_predicha(self):
        """Test una clase sin predicciones ni ejemplos tiene F1 0"""
        matrix = np.array([[3, 0, 0], [0, 2, 0], [0, 0, 0]])
        assert f1_from_confusion(matrix).tolist() == [1.0, 1.0, 0.0]

    def test_prediccion_perfecta(self):
        """Test predicción perfecta da macro-F1 = 1"""
        assert macro_f1_score([0, 1, 2, 1], [0, 1, 2, 1], 3) == 1.0

    def test_contra_fuerza_bruta(self):
        """Test 300 casos aleatorios contra el cálculo por definición"""
        rng = make_rng(99)
        for _ in range(300):
            k = int(rng.integers(2, 5))
            n = int(rng.integers(1, 40))
            y_true = rng.integers(0, k, size=n).tolist()
            y_pred = rng.integers(0, k, size=n).tolist()
            assert macro_f1_score(y_true, y_pred, k) == pytest.approx(_brute_force_macro_f1(y_true, y_pred, k))

    def test_sin_predicciones(self):
        """Test evaluar sin predicciones es un error"""
        with pytest.raises(InvalidInputError):
            macro_f1([], [], ['a', 'b'])

    def test_etiqueta_fuera_de_rango(self):
        """Test una predicción fuera de las clases es un error"""
        with pytest.raises(InvalidInputError):
            confusion_matrix([0, 1], [0, 2], 2)

    def test_reporte_desde_pares(self):
        """Test report_from_pairs toma los nombres de las Labels"""
        ic, lt = Label(0, 'IC'), Label(1, 'LT')
        report = report_from_pairs([(ic, ic), (ic, ic), (ic, lt), (lt, lt)])
        assert report.class_names == ['IC', 'LT']
        assert report.macro_f1 == pytest.approx(11 / 15)

    def test_json_estable(self):
        """Test el JSON del reporte tiene los campos en orden fijo"""
        report = macro_f1([0, 1], [0, 1], ['a', 'b'])
        assert list(report.to_json_dict()) == [
            'group', 'algo', 'seed', 'label_fraction', 'pretrain_source', 'per_class_f1', 'macro_f1',
            'confusion_matrix', 'wall_time_s',
        ]
