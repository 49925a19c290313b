"""
Configuration management module
Loads numeric tolerances, integrator settings and sampling boxes from JSON
"""
import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

CONFIG_DIR_ENV = "NOETHERKIT_CONFIG_DIR"
CONFIG_FILE_NAME = "noetherkit.json"


def default_config_dir() -> Path:
    """Directory holding the config file and user system definitions"""
    return Path(os.environ.get(CONFIG_DIR_ENV, "."))


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigManager:
    """Configuration manager"""

    def __init__(self, config_file: Optional[str] = None):
        if config_file is None:
            config_file = str(default_config_dir() / CONFIG_FILE_NAME)
        self.config_file = config_file
        self.config_path = Path(config_file)
        self._config: Dict[str, Any] = {}
        self.load_config()

    def load_config(self) -> None:
        """Load configuration file, merged over the defaults"""
        defaults = self.get_default_config()
        if self.config_path.exists():
            try:
                with open(self.config_path, 'r', encoding='utf-8') as f:
                    self._config = _merge(defaults, json.load(f))
                logger.debug("Loaded configuration from %s", self.config_path)
            except (json.JSONDecodeError, IOError) as e:
                logger.warning("Configuration file loading failed: %s", e)
                self._config = defaults
        else:
            self._config = defaults

    def get_default_config(self) -> Dict[str, Any]:
        """Get default configuration"""
        return {
            "tolerances": {
                # |det pi_ji| relative to ||pi||^n below this is singular
                "regular_det": 1e-12,
                "legendre_residual": 1e-12,
                "legendre_max_iter": 50,
                # |M12|, |H| at or below this put a point in the excluded region
                "excluded_eps": 1e-10,
                "anomaly_tol": 1e-13,
            },
            "fd": {
                "step": 1e-6,
            },
            "integrator": {
                "rtol": 1e-10,
                "atol": 1e-12,
                "samples": 1000,
                "safety": 0.9,
                "min_factor": 0.2,
                "max_factor": 5.0,
                "max_steps": 1_000_000,
            },
            "sampling": {
                "q_box": [-2.0, 2.0],
                "p_box": [-2.0, 2.0],
                "qt_box": [-2.0, 2.0],
                "qtt_box": [-2.0, 2.0],
                "t_box": [0.0, 1.0],
                "min_radius": 0.1,
                # |H|, |M12| and chart inequalities kept at least this far from zero
                "chart_margin": 0.05,
                "max_tries": 10000,
            },
            "checks": {
                "samples": 100,
                "seed": 0,
                "workers": 1,
            },
            "output": {
                "digits": 17,
            },
        }

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value, supports dot-separated nested keys"""
        keys = key.split('.')
        value = self._config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def get_tolerances(self) -> Dict[str, Any]:
        """Get numeric tolerances"""
        return self.get('tolerances', {})

    def get_integrator_config(self) -> Dict[str, Any]:
        """Get Runge-Kutta controller settings"""
        return self.get('integrator', {})

    def get_sampling_config(self) -> Dict[str, Any]:
        """Get default sampling box"""
        return self.get('sampling', {})


# Global configuration instance
config = ConfigManager()
