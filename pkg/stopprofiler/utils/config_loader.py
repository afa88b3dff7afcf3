# Configuration Loader Module

import os
import re
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv

from stopprofiler.core.errors import ConfigError

_ENV_PATTERN = re.compile(r"^\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-(.*))?\}$")

THREADS_ENV = "STOPPROFILER_THREADS"


class ConfigLoader:
    """Load and expose config/config.yaml"""

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        """
        Args:
            config_path: YAML file or a directory holding config.yaml;
                defaults to the repository's config/ directory
        """
        if config_path is None:
            config_path = Path(__file__).parent.parent.parent / "config"

        config_path = Path(config_path)
        self.config_path = config_path / "config.yaml" if config_path.is_dir() else config_path

        load_dotenv()
        self.config = self._substitute_env_vars(self._load_yaml(self.config_path))

    def _load_yaml(self, file_path: Path) -> Dict[str, Any]:
        """Load a YAML file; a missing file means built-in defaults"""
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                return yaml.safe_load(f) or {}
        except FileNotFoundError:
            return {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {file_path}: {e}") from e

    def _substitute_env_vars(self, config: Any) -> Any:
        """Replace "${VAR}" and "${VAR:-default}" strings from the environment"""
        if isinstance(config, dict):
            return {k: self._substitute_env_vars(v) for k, v in config.items()}
        elif isinstance(config, list):
            return [self._substitute_env_vars(item) for item in config]
        elif isinstance(config, str):
            match = _ENV_PATTERN.match(config)
            if match:
                name, default = match.groups()
                value = os.getenv(name)
                if value is None:
                    value = default if default is not None else config
                return yaml.safe_load(value) if value != "" else value
        return config

    @property
    def analysis_config(self) -> Dict[str, Any]:
        return self.config.get("analysis", {})

    @property
    def synth_config(self) -> Dict[str, Any]:
        return self.config.get("synth", {})

    @property
    def render_config(self) -> Dict[str, Any]:
        return self.config.get("render", {})

    @property
    def runtime_config(self) -> Dict[str, Any]:
        return self.config.get("runtime", {})

    @property
    def logging_config(self) -> Dict[str, Any]:
        return self.config.get("logging", {})

    @property
    def threads(self) -> int:
        """Worker cap; 0 means sequential. The environment wins over the file."""
        raw = os.getenv(THREADS_ENV)
        if raw is None or raw.strip() == "":
            raw = self.runtime_config.get("threads", 0)
        try:
            threads = int(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
        if threads < 0:
            raise ConfigError(f"{THREADS_ENV} must be >= 0, got {threads}")
        return threads

    def get(self, key: str, default: Any = None) -> Any:
        """Dotted lookup, e.g. get("analysis.k")"""
        value = self.config
        for k in key.split("."):
            if isinstance(value, dict):
                value = value.get(k)
            else:
                return default
        return value if value is not None else default
