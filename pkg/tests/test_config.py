import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from hopflax import discount
from hopflax.config import ProblemConfig, load_config
from hopflax.discount import ElapsedTime, ExponentialRate
from hopflax.hopf import LinearTerminal, PseudoHuberTerminal

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "dim": 1,
    "horizon": 1.0,
    "lagrangian": {"kind": "quadratic"},
    "terminal": {"kind": "linear", "a": 1.0},
    "discount": {"kind": "exponential_rate", "rho": 1.0},
}


def with_changes(**changes):
    cfg = json.loads(json.dumps(BASE))
    cfg.update(changes)
    return cfg


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    spec = load_config(path).to_spec()
    assert spec.discount.horizon == spec.horizon


def test_defaults_are_echoed():
    resolved = ProblemConfig.model_validate(BASE).resolved()
    assert resolved["numerics"]["quadrature"] == {"panels": 64, "nodes_per_panel": 8, "abs_tol": 1e-10}
    assert resolved["numerics"]["minimize"]["multistart"] == 9
    assert resolved["numerics"]["finite_diff"]["step"] == 1e-5
    assert resolved["terminal"]["b"] == 0.0


def test_conversion_to_spec():
    spec = ProblemConfig.model_validate(with_changes(
        dim=2,
        lagrangian={"kind": "quadratic", "Q": [[2.0, 0.0], [0.0, 1.0]]},
        terminal={"kind": "linear", "a": [1.0, -1.0], "b": 0.5},
        numerics={"minimize": {"multistart": 4}, "terminal_eps": 1e-6},
    )).to_spec()
    assert isinstance(spec.terminal, LinearTerminal)
    assert float(spec.terminal.value([1.0, 1.0])) == 0.5
    np.testing.assert_array_equal(spec.lagrangian.Q, [[2.0, 0.0], [0.0, 1.0]])
    assert spec.min_cfg.multistart == 4 and spec.terminal_eps == 1e-6


def test_discount_tables():
    spec = load_config(CONFIGS / "varying_rate_huber.json").to_spec()
    assert isinstance(spec.discount, ExponentialRate)
    assert discount.discount_eval(spec.discount, 0.0, 1.0) == pytest.approx(np.exp(-1.25), abs=1e-12)
    spec = ProblemConfig.model_validate(with_changes(
        discount={"kind": "elapsed_time", "theta": {"tau": [0.0, 1.0], "values": [1.0, 0.5]}},
        terminal={"kind": "pseudo_huber", "scale": 2.0},
    )).to_spec()
    assert isinstance(spec.discount, ElapsedTime) and isinstance(spec.terminal, PseudoHuberTerminal)
    assert discount.discount_eval(spec.discount, 0.2, 0.6) == pytest.approx(0.8)


@pytest.mark.parametrize(
    "bad",
    [
        {k: v for k, v in BASE.items() if k != "horizon"},
        with_changes(horizon=-1.0),
        with_changes(dim=0),
        with_changes(extra_field=1),
        with_changes(lagrangian={"kind": "quadratic", "scale": 2.0}),
        with_changes(lagrangian={"kind": "power", "p": 1.0}),
        with_changes(lagrangian={"kind": "entropy"}),
        with_changes(discount={"kind": "elapsed_time"}),
        with_changes(discount={"kind": "elapsed_time", "k": 1.0, "theta": {"tau": [0, 1], "values": [1, 0.5]}}),
        with_changes(numerics={"quadrature": {"nodes_per_panel": 5}}),
    ],
)
def test_invalid_configs_rejected(bad):
    with pytest.raises(ValidationError):
        ProblemConfig.model_validate(bad)


def test_semantic_errors_surface_on_conversion():
    from hopflax.errors import DomainError
    with pytest.raises(DomainError):
        ProblemConfig.model_validate(with_changes(
            discount={"kind": "exponential_rate", "rho": {"t": [0.0, 0.5], "values": [1.0, 1.0]}}
        )).to_spec()
    with pytest.raises(DomainError):
        ProblemConfig.model_validate(with_changes(terminal={"kind": "linear", "a": [1.0, 2.0]})).to_spec()
