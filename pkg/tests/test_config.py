"""Tests for config.ini loading and validation."""

import os
import shutil
import tempfile
import unittest
from unittest import mock

from core.config import EXACT_ENV_VAR, Config
from core.config_validator import ConfigValidator, validate_config


def write_ini(directory, body):
    path = os.path.join(directory, 'config.ini')
    with open(path, 'w', encoding='utf-8') as f:
        f.write('[Settings]\n' + body)
    return path


class TestConfig(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)

    def test_shipped_config(self):
        config = Config()
        self.assertEqual(config.get('log_level'), 'INFO')
        self.assertEqual(config.get_beta_grid(), [1.0, 2.0, 4.0, 8.0, 16.0])
        self.assertEqual(config.get_tolerances()['tie'], 1e-9)
        self.assertEqual(config.get_path_cap(), 4096)
        is_valid, summary = validate_config(config)
        self.assertTrue(is_valid, summary)

    def test_missing_file_uses_defaults(self):
        config = Config(os.path.join(self.tmp, 'absent.ini'))
        self.assertEqual(config.get_lookahead(), 5)
        self.assertEqual(config.get_tolerances()['convergence'], 1e-9)
        self.assertFalse(config.get_bool('exact_mode'))

    def test_bad_numbers_fall_back(self):
        config = Config(write_ini(self.tmp, 'path_cap = lots\nkms_tolerance = tiny\n'))
        self.assertEqual(config.get_path_cap(), 4096)
        self.assertEqual(config.get_tolerances()['kms'], 1e-12)

    def test_exact_mode_environment_wins(self):
        config = Config(write_ini(self.tmp, 'exact_mode = False\n'))
        with mock.patch.dict(os.environ, {EXACT_ENV_VAR: '1'}):
            self.assertTrue(config.is_exact_mode())
        with mock.patch.dict(os.environ, {EXACT_ENV_VAR: 'off'}):
            self.assertFalse(config.is_exact_mode())
        with mock.patch.dict(os.environ, {EXACT_ENV_VAR: ''}):
            self.assertFalse(config.is_exact_mode())

    def test_set_and_save(self):
        path = write_ini(self.tmp, 'lookahead = 5\n')
        config = Config(path)
        config.set('lookahead', 9)
        config.save_config()
        self.assertEqual(Config(path).get_lookahead(), 9)


class TestConfigValidator(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)

    def validate(self, body):
        return ConfigValidator().validate_config(Config(write_ini(self.tmp, body)))

    def test_invalid_log_level(self):
        is_valid, errors, _ = self.validate('log_level = LOUD\n')
        self.assertFalse(is_valid)
        self.assertTrue(any('LOUD' in e for e in errors))

    def test_non_positive_tolerance(self):
        is_valid, errors, _ = self.validate('tie_tolerance = 0\n')
        self.assertFalse(is_valid)
        self.assertTrue(any('tie_tolerance' in e for e in errors))

    def test_capacity_and_budget(self):
        is_valid, errors, _ = self.validate('path_cap = 0\niteration_budget = -1\n')
        self.assertFalse(is_valid)
        self.assertEqual(len(errors), 2)

    def test_unsorted_grid_is_a_warning(self):
        is_valid, errors, warnings = self.validate('beta_grid = 4,1,2\n')
        self.assertTrue(is_valid, errors)
        self.assertTrue(any('beta_grid' in w for w in warnings))

    def test_empty_grid(self):
        is_valid, _, _ = self.validate('beta_grid = ,\n')
        self.assertFalse(is_valid)

    def test_summary(self):
        config = Config(write_ini(self.tmp, 'output_precision = 40\n'))
        is_valid, summary = validate_config(config)
        self.assertFalse(is_valid)
        self.assertIn('output_precision', summary)


if __name__ == '__main__':
    unittest.main()
