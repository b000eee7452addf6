"""
Tests para la orquestación de experimentos y sus salidas
"""
import csv
import json

import pytest

from app.config import load_run_config
from app.models.reports import EvalReport, FractionRow, SummaryRow
from app.models.specs import DiffusionModel, NetworkModel
from app.services.experiment_runner import (
    check_fraction_shape, read_summary_csv, run_label_fraction, run_tables, summarize_fractions,
    summarize_reports, write_fraction_tsv, write_report_json, write_summary_csv,
)
from app.services import report_pdf
from app.services.figures import write_fraction_figure
from app.services.report_pdf import write_report_pdf
from app.services.synthetic_suite import SyntheticSuite


def _report(group='WS', algo='rf', f1=0.5, fraction=1.0, source=None, seed=0):
    return EvalReport(
        group=group, algo=algo, seed=seed, label_fraction=fraction, pretrain_source=source,
        class_names=['IC', 'LT'], per_class_f1={'IC': f1, 'LT': f1}, macro_f1=f1,
        confusion_matrix=[[1, 0], [0, 1]],
    )


def _curve(values, group='WS', source='self_only'):
    return [FractionRow(group=group, pretrain_source=source, label_fraction=f, macro_f1=v)
            for f, v in values.items()]


class TestResumen:
    def test_media_por_grupo_y_algoritmo(self):
        """Test dos semillas de rf se promedian: (0.6 + 0.8) / 2 = 0.7"""
        reports = [_report(f1=0.6), _report(algo='gcn', f1=0.9), _report(f1=0.8, seed=1)]
        rows = summarize_reports('diffusion', reports)

        assert [(r.group, r.algo) for r in rows] == [('WS', 'rf'), ('WS', 'gcn')]
        assert rows[0].macro_f1 == pytest.approx(0.7)
        assert rows[0].n_seeds == 2

    def test_fracciones_ordenadas(self):
        """Test filas ordenadas por grupo, fuente y fracción"""
        reports = [
            _report(algo='contrastive', f1=0.9, fraction=1.0, source='mixed'),
            _report(algo='contrastive', f1=0.7, fraction=0.1, source='mixed'),
            _report(algo='contrastive', f1=0.8, fraction=0.5, source='self_only'),
        ]
        rows = summarize_fractions(reports)
        assert [(r.pretrain_source, r.label_fraction) for r in rows] == [
            ('mixed', 0.1), ('mixed', 1.0), ('self_only', 0.5),
        ]


class TestShapeCheck:
    def test_forma_reproducida(self):
        """Test |0.85 - 0.9| <= 0.10 y 0.6 < 0.85"""
        check = check_fraction_shape(_curve({0.1: 0.6, 0.2: 0.85, 0.5: 0.88, 1.0: 0.9}))[0]

        assert check.stable_at_20 is True
        assert check.decline_at_10 is True
        assert check.reproduced is True
        assert list(check.f1_by_fraction) == ['0.1', '0.2', '0.5', '1']

    def test_caida_grande_en_20(self):
        """Test |0.7 - 0.9| > 0.10: no es estable"""
        check = check_fraction_shape(_curve({0.1: 0.6, 0.2: 0.7, 1.0: 0.9}))[0]
        assert check.stable_at_20 is False
        assert check.reproduced is False

    def test_sin_caida_en_10(self):
        """Test F1(10%) >= F1(20%): no hay caída"""
        check = check_fraction_shape(_curve({0.1: 0.85, 0.2: 0.85, 1.0: 0.9}))[0]
        assert check.decline_at_10 is False

    def test_fracciones_faltantes(self):
        """Test sin 10% la caída queda indeterminada"""
        check = check_fraction_shape(_curve({0.2: 0.85, 1.0: 0.9}))[0]
        assert check.decline_at_10 is None
        assert check.stable_at_20 is True
        assert check.reproduced is False

    def test_una_curva_por_grupo_y_fuente(self):
        """Test curvas separadas por (grupo, fuente)"""
        rows = _curve({0.2: 0.8, 1.0: 0.8}) + _curve({0.2: 0.8, 1.0: 0.8}, source='mixed')
        assert [c.pretrain_source for c in check_fraction_shape(rows)] == ['self_only', 'mixed']


class TestSalidas:
    def test_summary_csv(self, tmp_path):
        """Test summary.csv con precisión completa y lectura de vuelta"""
        rows = [SummaryRow(table='diffusion', group='WS', algo='rf', macro_f1=2 / 3)]
        path = tmp_path / 'summary.csv'
        write_summary_csv(rows, path)

        with open(path, newline='') as handle:
            lines = list(csv.reader(handle))
        assert lines[0] == ['table', 'group', 'algo', 'macro_f1', 'n_seeds']
        assert lines[1] == ['diffusion', 'WS', 'rf', repr(2 / 3), '1']
        assert read_summary_csv(path) == rows

    def test_fraction_tsv(self, tmp_path):
        """Test label_fraction.tsv separado por tabuladores"""
        path = tmp_path / 'label_fraction.tsv'
        write_fraction_tsv(_curve({0.5: 0.75}), path)

        lines = path.read_text().splitlines()
        assert lines[0].split('\t') == ['group', 'pretrain_source', 'label_fraction', 'macro_f1', 'n_seeds']
        assert lines[1].split('\t') == ['WS', 'self_only', '0.5', '0.75', '1']

    def test_report_json(self, tmp_path):
        """Test el JSON del reporte conserva el orden de los campos"""
        path = tmp_path / 'reports' / 'WS-rf.json'
        write_report_json(_report(f1=0.25), path)

        data = json.loads(path.read_text())
        assert list(data)[:3] == ['group', 'algo', 'seed']
        assert data['macro_f1'] == 0.25

    def test_pdf(self, tmp_path):
        """Test el PDF se genera con tablas y verificación de forma"""
        path = tmp_path / 'report.pdf'
        rows = [
            SummaryRow(table='diffusion', group='WS', algo='rf', macro_f1=0.8),
            SummaryRow(table='diffusion', group='WS', algo='gcn', macro_f1=0.9),
            SummaryRow(table='network', group='IC', algo='rf', macro_f1=0.7),
        ]
        curve = _curve({0.1: 0.6, 0.2: 0.85, 1.0: 0.9})
        write_report_pdf(path, summary_rows=rows, fraction_rows=curve,
                         shape_checks=check_fraction_shape(curve), seed=7)

        assert path.read_bytes().startswith(b'%PDF')

    def test_figura(self, tmp_path):
        """Test la figura se escribe en el formato de la extensión"""
        rows = _curve({0.1: 0.6, 0.2: 0.85, 1.0: 0.9}) + _curve({0.1: 0.5, 1.0: 0.8}, source='mixed')
        png = tmp_path / 'curve.png'
        svg = tmp_path / 'curve.svg'
        write_fraction_figure(rows, png)
        write_fraction_figure(rows, svg)

        assert png.read_bytes().startswith(b'\x89PNG')
        assert b'<svg' in svg.read_bytes()

    def test_tablas_por_tipo(self, tmp_path, testing_config, mocker):
        """Test table_diffusion.csv: 3 grupos x 4 algoritmos = 12 filas; summary.csv apila ambas tablas"""
        suite = SyntheticSuite({}, {}, list(NetworkModel), list(DiffusionModel))
        mocker.patch('app.services.experiment_runner.build_synthetic_suite', return_value=suite)
        mocker.patch('app.services.experiment_runner.build_group', side_effect=lambda spec, pools: spec.name)
        mocker.patch(
            'app.services.experiment_runner.run_group_experiment',
            side_effect=lambda group, algos, *args: [_report(group=group, algo=a.value) for a in algos],
        )
        run_tables(load_run_config(), tmp_path)

        diffusion = read_summary_csv(tmp_path / 'table_diffusion.csv')
        assert len(diffusion) == 12
        assert {r.group for r in diffusion} == {'BA', 'WS', 'LFR'}
        assert {r.table for r in read_summary_csv(tmp_path / 'table_network.csv')} == {'network'}
        assert len(read_summary_csv(tmp_path / 'summary.csv')) == 24

    def test_fraccion_con_pdf(self, tmp_path, testing_config, mocker):
        """Test label-fraction con pdf escribe report.pdf con la curva y su forma"""
        mocker.patch('app.services.experiment_runner.build_synthetic_suite')
        mocker.patch('app.services.experiment_runner.build_group')
        mocker.patch(
            'app.services.experiment_runner.run_label_fraction_experiment',
            side_effect=lambda group, fractions, source, *args: [
                _report(fraction=f, source=source.value, f1=0.5 + 0.4 * f) for f in fractions
            ],
        )
        generator = mocker.spy(report_pdf.ResultsReportPDFGenerator, 'generate_report')
        config = load_run_config(overrides={
            'run': {'seed': 3},
            'label_fraction': {'fractions': '0.1, 0.2, 1.0', 'pretrain_sources': 'self_only'},
        })
        rows = run_label_fraction(config, tmp_path, pdf=True)

        assert (tmp_path / 'report.pdf').read_bytes().startswith(b'%PDF')
        kwargs = generator.call_args.kwargs
        assert kwargs['fraction_rows'] == rows
        assert [c.group for c in kwargs['shape_checks']] == ['WS']
        assert kwargs['seed'] == 3


@pytest.mark.slow
class TestEjecucionCompleta:
    def test_tablas(self, testing_config, tmp_path):
        """Test tablas de difusión con el preset de tests"""
        config = load_run_config(overrides={
            'run': {'seed': 1},
            'experiment': {'networks': 'BA, WS', 'algos': 'rf, gbt', 'tables': 'diffusion'},
        })
        rows = run_tables(config, tmp_path, pdf=True)

        assert [(r.group, r.algo) for r in rows] == [('BA', 'rf'), ('BA', 'gbt'), ('WS', 'rf'), ('WS', 'gbt')]
        assert read_summary_csv(tmp_path / 'summary.csv') == rows
        assert (tmp_path / 'report.pdf').exists()
        assert load_run_config(tmp_path / 'run_config.cfg') == config

    def test_tablas_deterministas(self, testing_config, tmp_path):
        """Test misma semilla maestra, mismo summary.csv"""
        config = load_run_config(overrides={
            'experiment': {'networks': 'WS', 'diffusions': 'IC, LT', 'algos': 'rf', 'tables': 'diffusion'},
        })
        run_tables(config, tmp_path / 'a')
        run_tables(config, tmp_path / 'b')
        assert (tmp_path / 'a' / 'summary.csv').read_text() == (tmp_path / 'b' / 'summary.csv').read_text()

    def test_fraccion_de_etiquetas(self, testing_config, tmp_path):
        """Test curvas por fuente con conjunto externo de otras redes"""
        config = load_run_config(overrides={
            'experiment': {'diffusions': 'IC, LT'},
            'label_fraction': {'groups': 'WS', 'external_networks': 'BA', 'pretrain_sources': 'self_only, mixed'},
        })
        rows = run_label_fraction(config, tmp_path, plot=True, pdf=True)

        assert {(r.pretrain_source, r.label_fraction) for r in rows} == {
            ('self_only', 0.5), ('self_only', 1.0), ('mixed', 0.5), ('mixed', 1.0),
        }
        assert (tmp_path / 'label_fraction.png').exists()
        assert (tmp_path / 'report.pdf').read_bytes().startswith(b'%PDF')
        assert len(json.loads((tmp_path / 'shape_check.json').read_text())) == 2
