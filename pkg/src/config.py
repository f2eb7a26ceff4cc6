"""Configuration management module.

This module handles all workbench settings using JSON.
Following PEP 257 for docstring conventions.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List

import psutil

DEFAULT_TOLERANCES = {
    "limit_identity": 0.03,
    "limit_identity_weighted": 0.10,
    "limit_identity_2d": 0.05,
    "sandwich_lower_slack": 0.95,
    "sandwich_upper_factor": 20.0,
    "sandwich_spread": 10.0,
    "s1_increment_band": 0.25,
    "s_half_change": 0.02,
    "identity": 1e-8,
    "identity_bisection": 1e-6,
    "cover_ratio": 6.01,
    "rubio_a1_slack": 0.25,
    "ap_growth": 5.0,
    "interp_band": 0.5,
    "poincare_slope": 0.15,
    "duality_upper": 10.0,
    "duality_band": 0.5,
    "riesz_band": 0.25,
    "br_band": 0.25,
    "lusin_change": 0.5,
}


class Config:
    """Configuration class following singleton pattern for workbench settings."""

    _instance = None
    _config_file = "config.json"

    def __new__(cls):
        """Ensure only one instance of Config exists."""
        if cls._instance is None:
            cls._instance = super(Config, cls).__new__(cls)
            cls._instance._load_config()
        return cls._instance

    @classmethod
    def reload(cls):
        """Force reload the configuration from file."""
        if cls._instance is not None:
            cls._instance._load_config()
        return cls._instance

    @classmethod
    def reset(cls):
        """Clear the singleton instance (useful for testing)."""
        cls._instance = None
        cls._config_file = "config.json"

    @classmethod
    def use_file(cls, path: str) -> "Config":
        """Load settings from an explicit file instead of the search path."""
        cls._instance = None
        cls._config_file = str(Path(path).resolve())
        return cls()

    def _candidate_paths(self) -> List[Path]:
        if Path(self._config_file).is_absolute() or Path(self._config_file).name != self._config_file:
            return [Path(self._config_file)]
        # Try current directory first, then parent directory, then the repository root
        return [
            Path(self._config_file),
            Path("..") / self._config_file,
            Path(__file__).parent.parent / self._config_file,
        ]

    def _load_config(self):
        """Load configuration from JSON file."""
        try:
            config_file_used = None
            for config_path in self._candidate_paths():
                if config_path.exists():
                    config_file_used = config_path
                    break

            if config_file_used is None:
                raise FileNotFoundError(f"Config file not found in any of: {self._candidate_paths()}")

            with open(config_file_used, "r", encoding="utf-8") as f:
                config = json.load(f)

            logging.info(f"Successfully loaded config from: {config_file_used}")
            self._config_file = str(config_file_used)

            # Logging Configuration
            logging_config = config.get("logging", {})
            self.log_level = str(logging_config.get("level", "INFO")).upper()
            self.log_retention_days = int(logging_config.get("retention_days", 30))
            self.log_max_size_mb = int(logging_config.get("max_size_mb", 10))
            self.log_clear_on_startup = bool(logging_config.get("clear_on_startup", False))

            # Runtime Configuration
            runtime = config.get("runtime", {})
            threads = runtime.get("threads")
            self.threads = int(threads) if threads is not None else self.default_threads()
            if self.threads < 1:
                raise ValueError(f"runtime.threads must be >= 1, got {self.threads}")
            self.seed = int(runtime.get("seed", 0))
            self.output_dir = str(runtime.get("output_dir", "reports"))

            # Numerics Configuration
            numerics = config.get("numerics", {})
            self.luxemburg_rel_tol = float(numerics.get("luxemburg_rel_tol", 1e-10))
            self.luxemburg_max_iter = int(numerics.get("luxemburg_max_iter", 200))

            # Level-set Configuration
            bsvy = config.get("bsvy", {})
            self.lambda_points = int(bsvy.get("lambda_points", 48))
            self.min_reach_cells = float(bsvy.get("min_reach_cells", 8))
            self.max_reach_fraction = float(bsvy.get("max_reach_fraction", 0.25))
            self.limit_spread_threshold = float(bsvy.get("limit_spread_threshold", 0.1))
            self.self_cell_correction = bool(bsvy.get("self_cell_correction", True))
            self.scan_mode = str(bsvy.get("mode", "accelerated"))
            if self.scan_mode not in ("brute", "accelerated"):
                raise ValueError(f"bsvy.mode must be 'brute' or 'accelerated', got '{self.scan_mode}'")

            # Operator Configuration
            operators = config.get("operators", {})
            self.radius_steps_per_octave = int(operators.get("radius_steps_per_octave", 4))
            self.center_stride_1d = int(operators.get("center_stride_1d", 1))
            self.center_stride_nd = int(operators.get("center_stride_nd", 2))
            self.rdf_k_max = int(operators.get("rdf_k_max", 20))
            self.rdf_headroom = float(operators.get("rdf_headroom", 1.5))

            # Weight Configuration
            weights = config.get("weights", {})
            self.corner_stride = int(weights.get("corner_stride", 4))
            self.min_side_cells = int(weights.get("min_side_cells", 4))

            # Harness Configuration
            harness = config.get("harness", {})
            self.ladder_1d = [int(n) for n in harness.get("ladder_1d", [513, 1025, 2049, 4097])]
            self.ladder_2d = [int(n) for n in harness.get("ladder_2d", [64, 128])]
            self.tolerances = dict(DEFAULT_TOLERANCES)
            self.tolerances.update({k: float(v) for k, v in harness.get("tolerances", {}).items()})

        except FileNotFoundError:
            raise RuntimeError(f"Configuration file {self._config_file} not found")
        except json.JSONDecodeError as e:
            raise RuntimeError(f"Invalid JSON in configuration file: {e}")
        except (KeyError, ValueError, TypeError) as e:
            raise RuntimeError(f"Invalid configuration value: {e}")

    @staticmethod
    def default_threads() -> int:
        """Physical core count, falling back to 1."""
        return psutil.cpu_count(logical=False) or 1

    @property
    def config_file(self) -> str:
        return self._config_file

    def as_dict(self) -> Dict:
        """Settings in the config file layout."""
        return {
            "logging": {
                "level": self.log_level,
                "retention_days": self.log_retention_days,
                "max_size_mb": self.log_max_size_mb,
                "clear_on_startup": self.log_clear_on_startup,
            },
            "runtime": {
                "threads": self.threads,
                "seed": self.seed,
                "output_dir": self.output_dir,
            },
            "numerics": {
                "luxemburg_rel_tol": self.luxemburg_rel_tol,
                "luxemburg_max_iter": self.luxemburg_max_iter,
            },
            "bsvy": {
                "lambda_points": self.lambda_points,
                "min_reach_cells": self.min_reach_cells,
                "max_reach_fraction": self.max_reach_fraction,
                "limit_spread_threshold": self.limit_spread_threshold,
                "self_cell_correction": self.self_cell_correction,
                "mode": self.scan_mode,
            },
            "operators": {
                "radius_steps_per_octave": self.radius_steps_per_octave,
                "center_stride_1d": self.center_stride_1d,
                "center_stride_nd": self.center_stride_nd,
                "rdf_k_max": self.rdf_k_max,
                "rdf_headroom": self.rdf_headroom,
            },
            "weights": {
                "corner_stride": self.corner_stride,
                "min_side_cells": self.min_side_cells,
            },
            "harness": {
                "ladder_1d": self.ladder_1d,
                "ladder_2d": self.ladder_2d,
                "tolerances": self.tolerances,
            },
        }

    def save_config(self):
        """Save current configuration to JSON file."""
        try:
            with open(self._config_file, "w", encoding="utf-8") as f:
                json.dump(self.as_dict(), f, indent=4)
        except IOError as e:
            raise RuntimeError(f"Failed to save configuration: {e}")
