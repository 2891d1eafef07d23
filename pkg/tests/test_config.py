"""Тесты конфигурации запуска и окружения"""
import pytest
import yaml

from utils import config, log, setup_logger, run_context, Settings, UsageError
from harness.models import RunConfig, load_run_config


def _write(tmp_path, document, name='run.yaml'):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(document), encoding='utf-8')
    return str(path)


def test_default_document_loads():
    run_config = load_run_config()
    assert run_config.experiment == 'gap'
    assert run_config.sweep.variable == 'nu'
    assert len(run_config.sweep.values) == 5
    assert run_config.grid.R == run_config.params.R


def test_document_and_overrides(tmp_path):
    path = _write(tmp_path, {'params': {'nu': 1.0e-3, 'R': 3.0}, 'experiment': 'decay', 'seed': 1})
    run_config = load_run_config(path, seed=5, jobs=None)
    assert run_config.params.nu == 1.0e-3
    assert run_config.grid.R == 3.0
    assert run_config.experiment == 'decay'
    assert run_config.seed == 5
    assert run_config.jobs is None


@pytest.mark.parametrize('document', [
    {'experiment': 'spectrum'},
    {'params': {'nu': -1.0}},
    {'params': {'R': 2.0}, 'grid': {'R': 3.0}},
    {'sweep': {'variable': 'R', 'values': [0.5]}},
    {'options': {'eps_range': [10.0, 1.0]}},
])
def test_invalid_documents_raise_usage_error(tmp_path, document):
    with pytest.raises(UsageError):
        load_run_config(_write(tmp_path, document))


def test_missing_or_malformed_file(tmp_path):
    with pytest.raises(UsageError):
        load_run_config(str(tmp_path / 'missing.yaml'))
    path = tmp_path / 'list.yaml'
    path.write_text('- 1\n- 2\n', encoding='utf-8')
    with pytest.raises(UsageError):
        load_run_config(str(path))


def test_config_hash_ignores_output_and_jobs():
    base = RunConfig()
    assert base.config_hash() == RunConfig(output_dir='/tmp/x', jobs=4).config_hash()
    assert base.config_hash() != RunConfig(seed=1).config_hash()
    assert len(base.config_hash()) == 64


def test_tolerance_lookup():
    run_config = RunConfig(tolerances={'semigroup_margin': 1.0e-6})
    assert run_config.tolerance('semigroup_margin', 1.0e-8) == 1.0e-6
    assert run_config.tolerance('elliptic_refinement', 0.05) == 0.05


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.setattr(config.settings, 'output_dir', None)
    run_config = RunConfig(output_dir=str(tmp_path / 'doc'))
    assert run_config.resolve_output_dir() == tmp_path / 'doc'

    monkeypatch.setattr(config.settings, 'output_dir', str(tmp_path / 'env'))
    assert run_config.resolve_output_dir() == tmp_path / 'env'


def test_jobs_precedence(monkeypatch):
    monkeypatch.setattr(config.settings, 'jobs', None)
    assert RunConfig(jobs=3).resolve_jobs() == 3
    monkeypatch.setattr(config.settings, 'jobs', 6)
    assert RunConfig(jobs=3).resolve_jobs() == 6


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv('OUTPUT_DIR', '/data/tc')
    monkeypatch.setenv('JOBS', '8')
    monkeypatch.setenv('LOG_LEVEL', 'DEBUG')
    settings = Settings()
    assert settings.output_dir == '/data/tc'
    assert settings.jobs == 8
    assert settings.log_level == 'DEBUG'


def test_logger_level_switch():
    logger = setup_logger('DEBUG')
    try:
        messages = []
        sink = logger.add(messages.append, level='DEBUG', format='{message}')
        log.debug('проверка')
        logger.remove(sink)
        assert any('проверка' in m for m in messages)
    finally:
        setup_logger('INFO')


def test_log_records_carry_run_context(tmp_path):
    logger = setup_logger('INFO', log_dir=tmp_path)
    try:
        run_context(command='-', config_hash='-')
        messages = []
        sink = logger.add(messages.append, level='INFO', format='{extra[command]} {extra[config_hash]} {message}')
        log.info('до запуска')
        run_context(command='gap')
        run_context(config_hash='a' * 64)
        log.info('точка')
        logger.remove(sink)
        assert messages[0].startswith('- - до запуска')
        assert messages[1].startswith(f"gap {'a' * 12} точка")
        assert (tmp_path / 'tcstab.log').exists()
    finally:
        run_context(command='-', config_hash='-')
        setup_logger('INFO')
