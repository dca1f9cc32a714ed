"""
命令行入口测试：退出码与标准输出
"""

import json

import pytest

from main import main
from src.config import ConfigManager

PROBE = {
    'version': 1,
    'name': 'cli_probe',
    'seed': 1,
    'network': {'stack': {'depth': 2, 'width': 8}},
    'probe': {'batch_size': 64},
}

DIVERGING = {
    'version': 1,
    'name': 'cli_diverge',
    'seed': 2,
    'network': {'layers': [{'type': 'dense', 'in_dim': 4, 'out_dim': 1}]},
    'dataset': {'kind': 'regression', 'n': 128, 'dim': 4, 'seed': 1},
    'optimizer': {'kind': 'sgd', 'momentum': 0.0, 'weight_decay': 0.0},
    'schedule': {'base_lr': 1e6, 'batch_size': 128, 'total_steps': 200, 'decay': 'constant'},
    'train': {'log_every': 1000, 'progress': False},
}


@pytest.fixture(autouse=True)
def fresh_settings():
    yield
    ConfigManager.reload()


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


def test_no_command_prints_help(capsys):
    assert main([]) == 0
    assert "usage: gradflow" in capsys.readouterr().out


def test_analytic_table(capsys):
    assert main(['analytic', '--table', '-6', '6', '121']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == '# schema: gradflow.analytic/v1'
    assert lines[1] == 'r,c_r,sqrt_c_r'
    assert len(lines) == 2 + 121
    assert lines[2].startswith('-6,')


@pytest.mark.parametrize("table", [
    ['1', '-1', '5'], ['0', '1', '2.5'], ['0', '1', '0'], ['0', '1', 'inf'], ['0', '1', '-inf'], ['0', '1', 'nan'],
])
def test_analytic_bad_table(table):
    assert main(['analytic', '--table', *table]) == 2


def test_probe(tmp_path, out_dir, capsys):
    assert main(['probe', '--config', _write(tmp_path, 'p.json', PROBE)]) == 0
    assert "gradient_rate" in capsys.readouterr().out
    assert (out_dir / 'cli_probe' / 'profile.csv').exists()


def test_missing_config_file(tmp_path):
    assert main(['probe', '--config', str(tmp_path / 'missing.json')]) == 2


def test_invalid_config(tmp_path):
    assert main(['probe', '--config', _write(tmp_path, 'bad.json', {**PROBE, 'version': 9})]) == 2


def test_format_error(tmp_path, out_dir):
    images = tmp_path / 'images.idx'
    images.write_bytes(b'\x00\x00\x08\x01' + b'\x00' * 16)
    config = {
        'version': 1,
        'seed': 0,
        'network': {'layers': [{'type': 'dense', 'in_dim': 4, 'out_dim': 2}]},
        'dataset': {'kind': 'idx', 'images': str(images), 'labels': str(images)},
        'optimizer': {'kind': 'sgd'},
        'schedule': {'base_lr': 0.1, 'batch_size': 2, 'total_steps': 2},
    }
    assert main(['train', '--config', _write(tmp_path, 'idx.json', config)]) == 3


def test_train_diverged(tmp_path, out_dir, capsys):
    assert main(['train', '--config', _write(tmp_path, 'd.json', DIVERGING)]) == 4
    assert "训练发散" in capsys.readouterr().out
    assert (out_dir / 'cli_diverge' / 'summary.json').exists()


def test_sweep(tmp_path, out_dir, capsys):
    configs = tmp_path / 'configs'
    configs.mkdir()
    ok = {**DIVERGING, 'name': 'cli_ok'}
    ok['schedule'] = {**DIVERGING['schedule'], 'base_lr': 0.01, 'total_steps': 3}
    _write(configs, 'ok.json', ok)
    assert main(['sweep', '--configs', str(configs), '--seeds', '2', '--workers', '1']) == 0
    assert "cli_ok" in capsys.readouterr().out
    assert (out_dir / 'sweep' / 'summary.csv').exists()


def test_verbose_shows_settings(capsys, caplog):
    with caplog.at_level('INFO'):
        assert main(['-v', 'analytic', '--table', '0', '1', '3']) == 0
    assert "当前配置" in caplog.text
