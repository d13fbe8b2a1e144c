import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app import main
from data_utils import load_csv
from domain_types import TOOL_VERSION
from run_log_manager import RunLogManager

NS = '{http://www.w3.org/2000/svg}'

SMALL_CONFIG = {
    'lime': {'sample_count': 300},
    'gsls': {'sample_count': 200},
    'lore': {'size': 40, 'population': 40, 'generations': 4},
    'leap': {'sample_count': 300},
    'kernelshap': {'background_size': 10},
    'palex': {'sample_count': 300},
    'render': {'resolution': 20, 'panel_size': 120},
}


@pytest.fixture(scope='module')
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp('cli')
    config = root / 'config.json'
    config.write_text(json.dumps(SMALL_CONFIG))
    data = root / 'moons.csv'
    model = root / 'model.json'
    assert main(['gen-data', '--out', str(data), '--data-n', '200']) == 0
    assert main(['train', '--data', str(data), '--out', str(model), '--train-epochs', '300']) == 0
    return {'root': root, 'config': str(config), 'data': str(data), 'model': str(model)}


def _inputs(ws, index=4):
    return ['--model', ws['model'], '--data', ws['data'], '--index', str(index), '--config', ws['config']]


def test_gen_data_writes_the_requested_rows(workspace):
    frame = pd.read_csv(workspace['data'])
    assert len(frame) == 200
    assert set(frame.iloc[:, -1]) == {0, 1}


def test_explain_writes_an_explanation(workspace):
    out = workspace['root'] / 'lime.json'
    nb = workspace['root'] / 'lime_nb.csv'
    meta = workspace['root'] / 'lime_nb.json'
    args = ['explain'] + _inputs(workspace) + ['--method', 'lime', '--out', str(out),
                                               '--neighbourhood-out', str(nb), '--neighbourhood-meta', str(meta)]
    assert main(args) == 0
    doc = json.loads(out.read_text())
    assert doc['method'] == 'lime' and doc['surrogate'] == 'ridge'
    assert len(doc['attribution']) == 2
    assert len(pd.read_csv(nb)) == 300
    assert json.loads(meta.read_text())['config']['sample_count'] == 300


def test_explain_dumps_the_shapley_problem(workspace):
    problem = workspace['root'] / 'problem.csv'
    args = ['explain'] + _inputs(workspace) + ['--method', 'kernelshap', '--out',
                                               str(workspace['root'] / 'shap.json'),
                                               '--dump-problem', str(problem)]
    assert main(args) == 0
    frame = pd.read_csv(problem)
    assert list(frame.columns) == ['z0', 'z1', 'weight', 'target']
    assert len(frame) == 2


def test_compare_writes_every_artefact(workspace):
    root = workspace['root']
    paths = {name: root / name for name in ('table.csv', 'panel.svg', 'rules.txt', 'summary.csv', 'bars.svg')}
    args = ['compare'] + _inputs(workspace) + [
        '--out-table', str(paths['table.csv']), '--out-panel', str(paths['panel.svg']),
        '--out-rules', str(paths['rules.txt']), '--out-summary', str(paths['summary.csv']),
        '--out-bars', str(paths['bars.svg'])]
    assert main(args) == 0

    table = pd.read_csv(paths['table.csv'])
    assert list(table.columns) == ['method', 'feature_index', 'attribution', 'base_value', 'fidelity']
    assert list(table['method'].unique()) == ['lime', 'leap', 'kernelshap', 'palex']
    rules = paths['rules.txt'].read_text()
    assert '# gsls' in rules and '# lore' in rules
    assert len(pd.read_csv(paths['summary.csv'])) == 6
    assert paths['panel.svg'].read_text().count('class="panel"') == 6
    assert paths['bars.svg'].read_text().count('class="bar"') == 8


def _compare_outputs(ws, folder):
    folder.mkdir(exist_ok=True)
    paths = {name: folder / name for name in ('table.csv', 'panel.svg', 'rules.txt', 'summary.csv', 'bars.svg')}
    args = ['compare'] + _inputs(ws, index=9) + [
        '--out-table', str(paths['table.csv']), '--out-panel', str(paths['panel.svg']),
        '--out-rules', str(paths['rules.txt']), '--out-summary', str(paths['summary.csv']),
        '--out-bars', str(paths['bars.svg'])]
    assert main(args) == 0
    return paths


def test_every_output_carries_provenance(workspace):
    paths = _compare_outputs(workspace, workspace['root'] / 'stamped')
    meta = json.loads((workspace['root'] / 'stamped' / 'table.csv.meta.json').read_text())
    assert meta['command'] == 'compare' and meta['document'] == 'table.csv'
    assert meta['tool_version'] == TOOL_VERSION
    assert len(meta['config_digest']) == 64
    assert [m['method'] for m in meta['methods']] == ['lime', 'gsls', 'lore', 'leap', 'kernelshap', 'palex']
    assert [m['seed'] for m in meta['methods']] == [meta['seed'] + k * 1000 for k in range(6)]

    for svg in ('panel.svg', 'bars.svg'):
        root = ET.parse(paths[svg]).getroot()
        assert root.get('data-seed') == str(meta['seed'])
        assert root.get('data-config-digest') == meta['config_digest']
        assert root.get('data-tool-version') == TOOL_VERSION
    header = paths['rules.txt'].read_text().splitlines()[0]
    assert header == f"# seed={meta['seed']} config_digest={meta['config_digest']} tool_version={TOOL_VERSION}"
    summary_meta = json.loads((workspace['root'] / 'stamped' / 'summary.csv.meta.json').read_text())
    assert summary_meta['config_digest'] == meta['config_digest']

    model = json.loads(open(workspace['model']).read())
    assert model['seed'] == 0 and model['tool_version'] == TOOL_VERSION
    assert len(model['config_digest']) == 64
    data_meta = json.loads(open(workspace['data'] + '.meta.json').read())
    assert data_meta['command'] == 'gen-data' and data_meta['rows'] == 200 and data_meta['seed'] == 0


def test_pipeline_is_byte_reproducible(workspace):
    root = workspace['root'] / 'again'
    root.mkdir()
    data = root / 'moons.csv'
    model = root / 'model.json'
    assert main(['gen-data', '--out', str(data), '--data-n', '200']) == 0
    assert main(['train', '--data', str(data), '--out', str(model), '--train-epochs', '300']) == 0
    assert data.read_bytes() == open(workspace['data'], 'rb').read()
    assert model.read_bytes() == open(workspace['model'], 'rb').read()
    assert (root / 'moons.csv.meta.json').read_bytes() == open(workspace['data'] + '.meta.json', 'rb').read()

    first = _compare_outputs(workspace, root / 'first')
    second = _compare_outputs(workspace, root / 'second')
    for name in first:
        assert first[name].read_bytes() == second[name].read_bytes(), name
    for name in ('table.csv', 'summary.csv'):
        sidecar = name + '.meta.json'
        assert (root / 'first' / sidecar).read_bytes() == (root / 'second' / sidecar).read_bytes()

    explanations = []
    for name in ('a.json', 'b.json'):
        assert main(['explain'] + _inputs(workspace) + ['--method', 'lore', '--out', str(root / name)]) == 0
        explanations.append((root / name).read_bytes())
    assert explanations[0] == explanations[1]


def test_kernelshap_panel_points_are_hybrids_of_training_rows(workspace):
    config = workspace['root'] / 'full_background.json'
    config.write_text(json.dumps({k: v for k, v in SMALL_CONFIG.items() if k != 'kernelshap'}))
    panel = workspace['root'] / 'hybrids.svg'
    args = ['compare', '--model', workspace['model'], '--data', workspace['data'], '--index', '9',
            '--config', str(config), '--methods', 'lime,kernelshap',
            '--out-table', str(workspace['root'] / 'hybrids.csv'), '--out-panel', str(panel)]
    assert main(args) == 0

    rows = load_csv(workspace['data']).rows
    z_e = rows[9]
    groups = {g.find(f'{NS}text').text: g for g in ET.parse(panel).getroot().iter(f'{NS}g')
              if g.get('class') == 'panel'}
    neighbours = [c for c in groups['kernelshap'].iter(f'{NS}circle') if c.get('class') == 'neighbour']
    assert len(neighbours) == rows.shape[0] * 2
    for circle in neighbours:
        point = np.array([float(circle.get('data-x')), float(circle.get('data-y'))])
        assert np.any(point == z_e)
        assert np.any(np.all((rows == point) | (point == z_e), axis=1))


def test_unknown_method_lists_the_valid_ones(workspace, capsys):
    args = ['compare'] + _inputs(workspace) + ['--methods', 'lime,anchors',
                                               '--out-table', str(workspace['root'] / 'x.csv')]
    assert main(args) == 1
    err = capsys.readouterr().err
    assert "Unknown method 'anchors'" in err
    assert 'lime, gsls, lore, leap, kernelshap, palex' in err


def test_bad_index_fails_cleanly(workspace, capsys):
    args = ['shapley-exact'] + _inputs(workspace, index=5000) + ['--out', str(workspace['root'] / 'e.json')]
    assert main(args) == 1
    assert 'out of range' in capsys.readouterr().err


def test_shapley_exact_matches_kernelshap(workspace):
    exact = workspace['root'] / 'exact.json'
    shap = workspace['root'] / 'kernel.json'
    assert main(['shapley-exact'] + _inputs(workspace) + ['--out', str(exact)]) == 0
    assert main(['explain'] + _inputs(workspace) + ['--method', 'kernelshap', '--out', str(shap)]) == 0
    a = json.loads(exact.read_text())['attribution']
    b = json.loads(shap.read_text())['attribution']
    assert a == pytest.approx(b, abs=1e-8)


def test_strategies_table(tmp_path):
    out = tmp_path / 'strategies.csv'
    assert main(['strategies', '--out', str(out)]) == 0
    frame = pd.read_csv(out)
    assert frame['strategy'].tolist() == ['lime', 'gsls', 'lore', 'leap', 'kernelshap', 'palex']
    assert 'default_surrogate' in frame.columns


def test_runs_are_logged(workspace, tmp_path):
    ledger_path = str(tmp_path / 'runs.db')
    assert main(['strategies', '--run-log', ledger_path]) == 0
    args = ['explain'] + _inputs(workspace) + ['--method', 'nope', '--out', str(tmp_path / 'n.json'),
                                               '--run-log', ledger_path]
    assert main(args) == 1
    runs = RunLogManager(ledger_path).get_runs()['runs']
    assert [(r['command'], r['status']) for r in runs] == [('explain', 'error'), ('strategies', 'completed')]


def test_invalid_override_is_rejected(workspace, capsys):
    args = ['explain'] + _inputs(workspace) + ['--method', 'lime', '--out', str(workspace['root'] / 'o.json'),
                                               '--lime-sample-count', '0']
    assert main(args) == 1
    assert 'lime.sample_count' in capsys.readouterr().err


def test_compare_writes_only_its_named_outputs(workspace, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    _compare_outputs(workspace, tmp_path / 'out')
    assert [p.name for p in tmp_path.iterdir()] == ['out']
    assert {p.name for p in (tmp_path / 'out').iterdir()} == {
        'table.csv', 'table.csv.meta.json', 'panel.svg', 'rules.txt', 'summary.csv', 'summary.csv.meta.json',
        'bars.svg'}


def test_figure_script_only_removes_its_output_dir():
    script = (Path(__file__).resolve().parent.parent / 'run_figures.sh').read_text()
    removals = [line for line in script.splitlines() if line.strip().startswith(('rm ', 'find '))]
    assert removals
    assert all('"$OUT_DIR"' in line for line in removals)
