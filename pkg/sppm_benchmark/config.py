"""
Experiment configuration.

An experiment is one JSON document: a problem block, a list of methods and
run settings. Parsing is strict; any unknown key or invalid value raises
ConfigError naming the offending field, e.g. "methods[2].tau".
"""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from .exceptions import ConfigError
from .models import CorrectionKind

logger = logging.getLogger(__name__)

THEORY = "theory"

METHOD_KINDS: Dict[str, CorrectionKind] = {
    "sppm": CorrectionKind.NONE,
    "sppm-us": CorrectionKind.NONE,
    "sppm-is": CorrectionKind.NONE,
    "sppm-vs": CorrectionKind.NONE,
    "sppm-nice": CorrectionKind.NONE,
    "sppm-block": CorrectionKind.NONE,
    "sppm-stratified": CorrectionKind.NONE,
    "sppm-star": CorrectionKind.STAR,
    "sppm-gc": CorrectionKind.GC,
    "lsvrp": CorrectionKind.LSVRP,
    "point-saga": CorrectionKind.POINT_SAGA,
}
METHOD_NAMES = tuple(METHOD_KINDS)

# methods whose stepsize selector returns a finite gamma
THEORY_STEPSIZE_METHODS = frozenset(METHOD_NAMES) - {"sppm-star"}

# floor mixed into variance-sampling probabilities so every p_i > 0
VS_PROBABILITY_FLOOR = 1e-6

X0_RULES = ("default", "zeros")

Number = Union[int, float]


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_keys(data: Any, allowed: Sequence[str], path: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _require(data: Dict, key: str, path: str) -> Any:
    if key not in data:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return data[key]


def _positive_int(value: Any, path: str, minimum: int = 1) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(path, f"expected an integer >= {minimum}, got {value!r}")
    return value


def _positive_number(value: Any, path: str) -> float:
    if not _is_number(value) or not value > 0:
        raise ConfigError(path, f"expected a positive number, got {value!r}")
    return float(value)


def _number_list(value: Any, path: str) -> List[float]:
    if not isinstance(value, list) or not value or not all(_is_number(v) for v in value):
        raise ConfigError(path, "expected a nonempty list of numbers")
    return [float(v) for v in value]


@dataclass
class ProblemConfig:
    """Random regularized least-squares instance"""

    n: int
    d: int
    data_seed: int = 42
    lambda_rule: Union[str, Dict[str, float]] = "powers-of-two"
    zero_targets: bool = False

    KEYS = ("n", "d", "data_seed", "lambda_rule", "zero_targets")

    @classmethod
    def from_dict(cls, data: Dict, path: str = "problem") -> "ProblemConfig":
        _check_keys(data, cls.KEYS, path)
        n = _positive_int(_require(data, "n", path), f"{path}.n")
        d = _positive_int(_require(data, "d", path), f"{path}.d")
        data_seed = _positive_int(data.get("data_seed", 42), f"{path}.data_seed", minimum=0)

        rule = data.get("lambda_rule", "powers-of-two")
        if isinstance(rule, dict):
            _check_keys(rule, ("constant",), f"{path}.lambda_rule")
            _positive_number(_require(rule, "constant", f"{path}.lambda_rule"),
                             f"{path}.lambda_rule.constant")
        elif rule != "powers-of-two":
            raise ConfigError(f"{path}.lambda_rule",
                              "expected 'powers-of-two' or {\"constant\": c}")

        zero_targets = data.get("zero_targets", False)
        if not isinstance(zero_targets, bool):
            raise ConfigError(f"{path}.zero_targets", "expected true or false")
        return cls(n=n, d=d, data_seed=data_seed, lambda_rule=rule, zero_targets=zero_targets)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class MethodConfig:
    """
    One method entry.

    Attributes:
        name: method name from METHOD_NAMES
        gamma: stepsize, list of stepsizes, or "theory" for the recommended one
        label: display name, derived from name and extras when omitted
        p: refresh probability (lsvrp)
        tau: subset size (sppm-nice)
        probs: singleton probabilities (sppm)
        blocks: index partition (sppm-block, sppm-stratified)
        block_probs: block probabilities (sppm-block)
        alpha: Lyapunov weight to record, a number or "theory"
        epsilon: target accuracy of the SPPM stepsize selectors
    """

    name: str
    gamma: Union[float, List[float], str] = 1.0
    label: Optional[str] = None
    p: Optional[float] = None
    tau: Optional[int] = None
    probs: Optional[List[float]] = None
    blocks: Optional[List[List[int]]] = None
    block_probs: Optional[List[float]] = None
    alpha: Optional[Union[float, str]] = None
    epsilon: float = 1e-2

    KEYS = ("name", "gamma", "label", "p", "tau", "probs", "blocks", "block_probs",
            "alpha", "epsilon")

    @classmethod
    def from_dict(cls, data: Dict, path: str = "method") -> "MethodConfig":
        _check_keys(data, cls.KEYS, path)
        name = _require(data, "name", path)
        if name not in METHOD_KINDS:
            raise ConfigError(f"{path}.name",
                              f"unknown method {name!r}, expected one of {', '.join(METHOD_NAMES)}")

        gamma = data.get("gamma", 1.0)
        if gamma == THEORY:
            if name not in THEORY_STEPSIZE_METHODS:
                raise ConfigError(f"{path}.gamma", f"{name} has no finite theoretical stepsize")
        elif isinstance(gamma, list):
            gamma = [_positive_number(g, f"{path}.gamma[{j}]") for j, g in enumerate(gamma)]
            if not gamma:
                raise ConfigError(f"{path}.gamma", "expected at least one stepsize")
        else:
            gamma = _positive_number(gamma, f"{path}.gamma")

        label = data.get("label")
        if label is not None and not isinstance(label, str):
            raise ConfigError(f"{path}.label", "expected a string")

        p = data.get("p")
        if name == "lsvrp":
            p = _require(data, "p", path)
            if not _is_number(p) or not 0 < p <= 1:
                raise ConfigError(f"{path}.p", f"expected a probability in (0, 1], got {p!r}")
            p = float(p)
        elif p is not None:
            raise ConfigError(f"{path}.p", f"{name} takes no refresh probability")

        tau = data.get("tau")
        if name == "sppm-nice":
            tau = _positive_int(_require(data, "tau", path), f"{path}.tau")
        elif tau is not None:
            raise ConfigError(f"{path}.tau", f"{name} takes no subset size")

        probs = data.get("probs")
        if probs is not None:
            if name != "sppm":
                raise ConfigError(f"{path}.probs", "only sppm takes explicit probabilities")
            probs = _number_list(probs, f"{path}.probs")

        blocks = data.get("blocks")
        if name in ("sppm-block", "sppm-stratified"):
            blocks = _require(data, "blocks", path)
            if (not isinstance(blocks, list) or not blocks
                    or not all(isinstance(b, list) and b for b in blocks)):
                raise ConfigError(f"{path}.blocks", "expected a nonempty list of nonempty lists")
            for j, block in enumerate(blocks):
                if not all(isinstance(i, int) and not isinstance(i, bool) for i in block):
                    raise ConfigError(f"{path}.blocks[{j}]", "expected integer indices")
        elif blocks is not None:
            raise ConfigError(f"{path}.blocks", f"{name} takes no partition")

        block_probs = data.get("block_probs")
        if name == "sppm-block":
            block_probs = _number_list(_require(data, "block_probs", path), f"{path}.block_probs")
        elif block_probs is not None:
            raise ConfigError(f"{path}.block_probs", f"{name} takes no block probabilities")

        alpha = data.get("alpha")
        if alpha is not None and alpha != THEORY:
            if not _is_number(alpha) or alpha < 0:
                raise ConfigError(f"{path}.alpha", "expected a nonnegative number or 'theory'")
            alpha = float(alpha)

        epsilon = _positive_number(data.get("epsilon", 1e-2), f"{path}.epsilon")

        return cls(name=name, gamma=gamma, label=label, p=p, tau=tau, probs=probs,
                   blocks=blocks, block_probs=block_probs, alpha=alpha, epsilon=epsilon)

    @property
    def kind(self) -> CorrectionKind:
        return METHOD_KINDS[self.name]

    def gammas(self) -> List[Union[float, str]]:
        if isinstance(self.gamma, list):
            return list(self.gamma)
        return [self.gamma]

    def display_name(self) -> str:
        """Label, or the name with its distinguishing parameter"""
        if self.label:
            return self.label
        if self.name == "sppm-nice":
            return f"sppm-nice[tau={self.tau}]"
        if self.name == "lsvrp":
            return f"lsvrp[p={self.p!r}]"
        return self.name

    def to_dict(self) -> Dict[str, Any]:
        return {key: value for key, value in asdict(self).items() if value is not None}


@dataclass
class OutputConfig:
    """Output file names, relative to the output directory"""

    csv: str = "results.csv"
    svg: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict, path: str = "output") -> "OutputConfig":
        _check_keys(data, ("csv", "svg"), path)
        csv_name = _require(data, "csv", path)
        if not isinstance(csv_name, str) or not csv_name:
            raise ConfigError(f"{path}.csv", "expected a file name")
        svg_name = data.get("svg")
        if svg_name is not None and (not isinstance(svg_name, str) or not svg_name):
            raise ConfigError(f"{path}.svg", "expected a file name")
        return cls(csv=csv_name, svg=svg_name)

    def to_dict(self) -> Dict[str, Any]:
        return {key: value for key, value in asdict(self).items() if value is not None}


@dataclass
class ExperimentConfig:
    """A complete experiment: one problem, several methods, shared run settings"""

    name: str
    problem: ProblemConfig
    methods: List[MethodConfig]
    iterations: int = 1000
    runs: int = 10
    base_seed: int = 0
    x0: Union[str, List[float]] = "default"
    output: OutputConfig = field(default_factory=OutputConfig)

    KEYS = ("name", "problem", "methods", "iterations", "runs", "base_seed", "x0", "output")

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentConfig":
        _check_keys(data, cls.KEYS, "")
        name = data.get("name", "experiment")
        if not isinstance(name, str) or not name:
            raise ConfigError("name", "expected a nonempty string")

        problem = ProblemConfig.from_dict(_require(data, "problem", ""), "problem")

        methods_data = _require(data, "methods", "")
        if not isinstance(methods_data, list) or not methods_data:
            raise ConfigError("methods", "expected a nonempty list")
        methods = [MethodConfig.from_dict(m, f"methods[{j}]") for j, m in enumerate(methods_data)]

        labels = [m.display_name() for m in methods]
        for j, label in enumerate(labels):
            if labels.index(label) != j:
                raise ConfigError(f"methods[{j}].label", f"duplicate method label {label!r}")

        iterations = _positive_int(data.get("iterations", 1000), "iterations")
        runs = _positive_int(data.get("runs", 10), "runs")
        base_seed = _positive_int(data.get("base_seed", 0), "base_seed", minimum=0)

        x0 = data.get("x0", "default")
        if isinstance(x0, list):
            x0 = _number_list(x0, "x0")
            if len(x0) != problem.d:
                raise ConfigError("x0", f"expected {problem.d} coordinates, got {len(x0)}")
        elif x0 not in X0_RULES:
            raise ConfigError("x0", f"expected one of {X0_RULES} or a list of numbers")

        output = OutputConfig.from_dict(data.get("output", {"csv": f"{name}.csv"}))
        return cls(name=name, problem=problem, methods=methods, iterations=iterations,
                   runs=runs, base_seed=base_seed, x0=x0, output=output)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "problem": self.problem.to_dict(),
            "methods": [m.to_dict() for m in self.methods],
            "iterations": self.iterations,
            "runs": self.runs,
            "base_seed": self.base_seed,
            "x0": self.x0,
            "output": self.output.to_dict(),
        }

    def with_overrides(self, seed: Optional[int] = None,
                       runs: Optional[int] = None) -> "ExperimentConfig":
        """Copy with command-line overrides applied"""
        overrides = {}
        if seed is not None:
            overrides["base_seed"] = _positive_int(seed, "base_seed", minimum=0)
        if runs is not None:
            overrides["runs"] = _positive_int(runs, "runs")
        return replace(self, **overrides)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate an experiment file.

    Raises:
        ConfigError: malformed JSON or invalid content
        OSError: the file cannot be read
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("<document>", f"invalid JSON: {e}", cause=e) from e
    config = ExperimentConfig.from_dict(data)
    logger.info(f"Loaded experiment '{config.name}' with {len(config.methods)} methods from {path}")
    return config


_FIG1_GAMMAS = [1e-4, 1e-2, 1.0, 1e2]
_FIG3_GAMMAS = [1e-2, 1.0, 1e2]
_FIG4_PROBABILITIES = [1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 1.0]

PRESETS: Dict[str, Dict[str, Any]] = {
    "fig1": {
        "name": "fig1",
        "problem": {"n": 10, "d": 3, "data_seed": 42, "lambda_rule": "powers-of-two"},
        "methods": [
            {"name": "sppm-us", "gamma": _FIG1_GAMMAS},
            {"name": "sppm-is", "gamma": _FIG1_GAMMAS},
            {"name": "sppm-vs", "gamma": _FIG1_GAMMAS},
            {"name": "sppm-nice", "tau": 9, "gamma": _FIG1_GAMMAS},
        ],
        "iterations": 2000,
        "runs": 10,
        "output": {"csv": "fig1.csv", "svg": "fig1.svg"},
    },
    "fig2": {
        "name": "fig2",
        "problem": {"n": 10, "d": 3, "data_seed": 42, "lambda_rule": "powers-of-two"},
        "methods": [
            {"name": "sppm-nice", "tau": tau, "gamma": [1e-2, 1e-1, 1.0]}
            for tau in (1, 2, 5, 9, 10)
        ],
        "iterations": 2000,
        "runs": 10,
        "output": {"csv": "fig2.csv", "svg": "fig2.svg"},
    },
    "fig3": {
        "name": "fig3",
        "problem": {"n": 1000, "d": 10, "data_seed": 42, "lambda_rule": {"constant": 1.0}},
        "methods": [
            {"name": "sppm-us", "gamma": _FIG3_GAMMAS},
            {"name": "sppm-gc", "gamma": _FIG3_GAMMAS},
            {"name": "sppm-star", "gamma": _FIG3_GAMMAS},
        ],
        "iterations": 500,
        "runs": 5,
        "output": {"csv": "fig3.csv", "svg": "fig3.svg"},
    },
    "fig4": {
        "name": "fig4",
        "problem": {"n": 1000, "d": 10, "data_seed": 42, "lambda_rule": {"constant": 1.0}},
        "methods": (
            [{"name": "sppm-gc", "gamma": THEORY}, {"name": "point-saga", "gamma": THEORY}]
            + [{"name": "lsvrp", "p": p, "gamma": THEORY} for p in _FIG4_PROBABILITIES]
        ),
        "iterations": 3000,
        "runs": 3,
        "output": {"csv": "fig4.csv", "svg": "fig4.svg"},
    },
}


def get_preset(name: str) -> ExperimentConfig:
    """
    Raises:
        ConfigError: no preset with that name
    """
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}, expected one of {', '.join(PRESETS)}")
    return ExperimentConfig.from_dict(PRESETS[name])
