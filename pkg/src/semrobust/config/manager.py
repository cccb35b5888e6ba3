"""
Configuration management for semantic robustness experiments.

Provides layered experiment configuration with support for:
- Packaged defaults (resources/experiment_defaults.json)
- Flat JSON or YAML experiment files
- Environment variable overrides (SEMROBUST_*)
- Explicit overrides from the command line
- Range validation
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from ..core.attacks import STEP_RULES
from ..core.attacks import FabConfig
from ..core.attacks import PgdConfig
from ..core.campaign import ATTACK_METHODS
from ..core.certify import SMOOTHING_MODES
from ..core.certify import SmoothingConfig
from ..core.oracle import LOSS_KINDS
from ..core.ranking import RANKING_AGGREGATORS
from ..core.semgeo import BudgetSpec
from ..exceptions import ConfigurationError
from ..utils.logging import LEVEL_MAP
from ..utils.logging import get_logger

logger = get_logger(__name__)

ENV_PREFIX = "SEMROBUST_"
DEFAULTS_RESOURCE = "experiment_defaults.json"
PROJECT_CONFIG_NAMES = ("experiment.json", "experiment.yaml", "experiment.yml")
ORACLE_FAMILIES = ("prototype", "linear")
SWEEP_AXES = ("dataset-size", "num-attacked", "budget")


def _resource_path(name):
    return Path(__file__).parent.parent / "resources" / name


def load_defaults():
    """Packaged default experiment settings."""
    path = _resource_path(DEFAULTS_RESOURCE)
    if not path.exists():
        raise ConfigurationError(f"Resource file not found: {path.name}")
    with open(path, encoding="utf-8") as f:
        return json.load(f)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated settings for one experiment run."""

    num_identities: int
    latent_dim: int
    population_seed: int
    population_file: str | None
    oracle_family: str
    embed_dim: int
    temperature: float
    oracle_seed: int
    num_attributes: int
    attribute_names: tuple | None
    basis_file: str | None
    basis_seed: int
    epsilons: tuple
    budget_scale: float
    method: str
    iterations: int
    restarts: int
    step_size: float
    loss_kind: str
    step_rule: str
    target_classes: int
    alpha_max: float
    beta: float
    eta: float
    final_search: bool
    num_attacked: int
    seed: int
    workers: int
    sweep_axis: str
    sweep_values: tuple
    alpha_rank: float
    ranking_aggregator: str
    smoothing_mode: str
    sigma: float
    n0: int
    n: int
    alpha_cert: float
    num_certify: int
    out_dir: str
    log_level: str

    def pgd_config(self) -> PgdConfig:
        return PgdConfig(
            iterations=self.iterations,
            restarts=self.restarts,
            step_size=self.step_size,
            loss_kind=self.loss_kind,
            step_rule=self.step_rule,
            seed=self.seed,
        )

    def fab_config(self) -> FabConfig:
        return FabConfig(
            iterations=self.iterations,
            restarts=self.restarts,
            target_classes=self.target_classes,
            alpha_max=self.alpha_max,
            beta=self.beta,
            eta=self.eta,
            final_search=self.final_search,
            seed=self.seed,
        )

    def attack_config(self):
        return self.pgd_config() if self.method == "pgd" else self.fab_config()

    def smoothing_config(self) -> SmoothingConfig:
        return SmoothingConfig(
            mode=self.smoothing_mode,
            sigma=self.sigma,
            n0=self.n0,
            n=self.n,
            alpha=self.alpha_cert,
            seed=self.seed,
        )

    def budget_spec(self) -> BudgetSpec:
        return BudgetSpec(tuple(self.epsilons))


class ConfigManager:
    """
    Layered experiment configuration.

    Precedence, lowest to highest:
    1. Packaged defaults
    2. Experiment file (explicit path, else config/experiment.json searched upward)
    3. Environment variables (SEMROBUST_<KEY>)
    4. Overrides passed by the caller (CLI flags)
    """

    def __init__(self, config_file=None, overrides=None, search=True):
        """
        Initialize configuration manager.

        Args:
            config_file: Path to a JSON/YAML experiment file. If None, searches hierarchically
            overrides: Mapping of key -> value applied last; None values are ignored
            search: Whether to look for a project config when config_file is None
        """
        self._defaults = load_defaults()
        self._config_data = dict(self._defaults)
        self.config_path = None

        self._load_configuration(config_file, search)
        self._apply_environment_overrides()
        self._apply_overrides(overrides or {})
        self.validate()

        source = self.config_path if self.config_path else "packaged defaults"
        logger.debug(f"Experiment configuration loaded from {source}")

    def _load_configuration(self, config_file, search):
        """Load configuration from a JSON or YAML file."""
        if config_file is None and search:
            config_file = self._find_config_file()
        if config_file is None:
            return

        config_path = Path(config_file)
        if not config_path.exists():
            raise ConfigurationError(f"Configuration file not found: {config_path}", "config")

        try:
            with open(config_path, encoding="utf-8") as f:
                document = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Failed to parse configuration file: {e}", "config")
        if not isinstance(document, dict):
            raise ConfigurationError(
                f"Configuration file must hold a flat mapping: {config_path}", "config"
            )

        self._merge(document, source=str(config_path))
        self.config_path = config_path
        logger.info(f"Loaded configuration from: {config_path}")

    def _find_config_file(self):
        """Search ./config/experiment.{json,yaml} up to 3 directory levels."""
        current_dir = Path.cwd()
        for _ in range(3):
            for name in PROJECT_CONFIG_NAMES:
                config_path = current_dir / "config" / name
                if config_path.exists():
                    logger.info(f"Using project config: {config_path}")
                    return config_path
            current_dir = current_dir.parent
        return None

    def _merge(self, document, source):
        unknown = sorted(set(document) - set(self._defaults))
        if unknown:
            raise ConfigurationError(
                f"Unknown configuration keys in {source}: {unknown}", unknown[0]
            )
        self._config_data.update(document)

    def _apply_environment_overrides(self):
        """Apply SEMROBUST_<KEY> environment variables, coerced to the default's type."""
        for env_var, raw in os.environ.items():
            if not env_var.startswith(ENV_PREFIX):
                continue
            key = env_var[len(ENV_PREFIX) :].lower()
            if key not in self._defaults:
                continue
            self._config_data[key] = self._coerce(key, raw)
            logger.debug(f"Applied environment override: {env_var} = {raw}")

    def _coerce(self, key, raw):
        default = self._defaults[key]
        if key == "attribute_names":
            return [name.strip() for name in raw.split(",") if name.strip()]
        try:
            if isinstance(default, bool):
                return raw.strip().lower() in ("1", "true", "yes", "on")
            if isinstance(default, int):
                return int(raw)
            if isinstance(default, float):
                return float(raw)
            if isinstance(default, list):
                return [float(v) for v in raw.replace("[", "").replace("]", "").split(",") if v]
        except ValueError as e:
            raise ConfigurationError(f"Invalid value for {key}: {e}", key, raw)
        return raw

    def _apply_overrides(self, overrides):
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in self._defaults:
                raise ConfigurationError(f"Unknown configuration key: {key}", key)
            self._config_data[key] = value

    def validate(self):
        """Check every value against its documented range."""
        c = self._config_data

        def require(condition, key, rule):
            if not condition:
                raise ConfigurationError(f"Invalid {key}: must be {rule}", key, c.get(key))

        for key in ("num_identities", "num_attacked", "num_certify"):
            require(self.get_int(key) >= 1, key, ">= 1")
        require(self.get_int("num_identities") >= 2, "num_identities", ">= 2")
        for key in ("latent_dim", "embed_dim", "num_attributes", "iterations", "restarts"):
            require(self.get_int(key) >= 1, key, ">= 1")
        require(self.get_int("target_classes") >= 1, "target_classes", ">= 1")
        require(self.get_int("n0") >= 1 and self.get_int("n") >= 1, "n", ">= 1")
        require(self.get_int("workers") >= 1, "workers", ">= 1")
        for key in ("temperature", "step_size", "budget_scale", "sigma"):
            require(self.get_float(key) > 0, key, "> 0")
        for key in ("alpha_rank", "alpha_cert", "beta"):
            require(0 < self.get_float(key) < 1, key, "in (0, 1)")
        require(0 < self.get_float("alpha_max") <= 1, "alpha_max", "in (0, 1]")
        require(self.get_float("eta") >= 1, "eta", ">= 1")
        require(
            c["oracle_family"] in ORACLE_FAMILIES, "oracle_family", f"one of {ORACLE_FAMILIES}"
        )
        require(c["method"] in ATTACK_METHODS, "method", f"one of {ATTACK_METHODS}")
        require(c["loss_kind"] in LOSS_KINDS, "loss_kind", f"one of {LOSS_KINDS}")
        require(c["step_rule"] in STEP_RULES, "step_rule", f"one of {STEP_RULES}")
        require(c["sweep_axis"] in SWEEP_AXES, "sweep_axis", f"one of {SWEEP_AXES}")
        require(
            c["ranking_aggregator"] in RANKING_AGGREGATORS,
            "ranking_aggregator",
            f"one of {RANKING_AGGREGATORS}",
        )
        require(
            c["smoothing_mode"] in SMOOTHING_MODES, "smoothing_mode", f"one of {SMOOTHING_MODES}"
        )
        require(str(c["log_level"]).upper() in LEVEL_MAP, "log_level", f"one of {list(LEVEL_MAP)}")

        epsilons = self.get_list("epsilons")
        require(
            len(epsilons) == self.get_int("num_attributes"),
            "epsilons",
            "one value per attribute",
        )
        require(all(e > 0 for e in epsilons), "epsilons", "positive")
        require(len(self.get_list("sweep_values")) >= 1, "sweep_values", "non-empty")
        names = c.get("attribute_names")
        if names is not None:
            require(
                len(names) == self.get_int("num_attributes") and len(set(names)) == len(names),
                "attribute_names",
                "distinct, one per attribute",
            )
        require(
            c["basis_file"] is not None
            or self.get_int("num_attributes") <= self.get_int("latent_dim"),
            "num_attributes",
            "<= latent_dim",
        )
        for key in ("population_file", "basis_file"):
            if c.get(key):
                require(Path(c[key]).exists(), key, "an existing file")

    def get(self, key, fallback=None):
        """Get a configuration value."""
        return self._config_data.get(key, fallback)

    def get_int(self, key, fallback=0):
        value = self._config_data.get(key, fallback)
        try:
            return int(value)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid integer value for {key}: {e}", key, value)

    def get_float(self, key, fallback=0.0):
        value = self._config_data.get(key, fallback)
        try:
            return float(value)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid real value for {key}: {e}", key, value)

    def get_bool(self, key, fallback=False):
        value = self._config_data.get(key, fallback)
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)

    def get_list(self, key, fallback=()):
        value = self._config_data.get(key, fallback)
        if value is None:
            return []
        if isinstance(value, (int, float)):
            return [float(value)]
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid list value for {key}: {e}", key, value)

    @property
    def out_dir(self):
        return Path(self.get("out_dir", "output"))

    @property
    def log_level(self):
        return str(self.get("log_level", "INFO")).upper()

    @property
    def workers(self):
        return self.get_int("workers", 1)

    def to_dict(self):
        return dict(self._config_data)

    def to_experiment_config(self) -> ExperimentConfig:
        c = self._config_data
        names = c.get("attribute_names")
        return ExperimentConfig(
            num_identities=self.get_int("num_identities"),
            latent_dim=self.get_int("latent_dim"),
            population_seed=self.get_int("population_seed"),
            population_file=c.get("population_file"),
            oracle_family=c["oracle_family"],
            embed_dim=self.get_int("embed_dim"),
            temperature=self.get_float("temperature"),
            oracle_seed=self.get_int("oracle_seed"),
            num_attributes=self.get_int("num_attributes"),
            attribute_names=tuple(names) if names is not None else None,
            basis_file=c.get("basis_file"),
            basis_seed=self.get_int("basis_seed"),
            epsilons=tuple(self.get_list("epsilons")),
            budget_scale=self.get_float("budget_scale"),
            method=c["method"],
            iterations=self.get_int("iterations"),
            restarts=self.get_int("restarts"),
            step_size=self.get_float("step_size"),
            loss_kind=c["loss_kind"],
            step_rule=c["step_rule"],
            target_classes=self.get_int("target_classes"),
            alpha_max=self.get_float("alpha_max"),
            beta=self.get_float("beta"),
            eta=self.get_float("eta"),
            final_search=self.get_bool("final_search"),
            num_attacked=self.get_int("num_attacked"),
            seed=self.get_int("seed"),
            workers=self.get_int("workers"),
            sweep_axis=c["sweep_axis"],
            sweep_values=tuple(self.get_list("sweep_values")),
            alpha_rank=self.get_float("alpha_rank"),
            ranking_aggregator=c["ranking_aggregator"],
            smoothing_mode=c["smoothing_mode"],
            sigma=self.get_float("sigma"),
            n0=self.get_int("n0"),
            n=self.get_int("n"),
            alpha_cert=self.get_float("alpha_cert"),
            num_certify=self.get_int("num_certify"),
            out_dir=str(c["out_dir"]),
            log_level=self.log_level,
        )


# Global configuration instance
_config_manager = None


def get_config_manager(config_file=None, overrides=None):
    """
    Get global configuration manager instance.

    Args:
        config_file: Path to configuration file
        overrides: Values applied on top of file and environment settings

    Returns:
        ConfigManager instance
    """
    global _config_manager

    if _config_manager is None:
        _config_manager = ConfigManager(config_file, overrides)

    return _config_manager


def reset_config_manager():
    """Reset global configuration manager (useful for testing)."""
    global _config_manager
    _config_manager = None
