"""Method registry: maps spec method blocks onto solver calls."""
from __future__ import annotations

import numpy as np

from ..acvi import acvi_inexact_run, acvi_run
from ..baselines import fw_run, run_baseline
from ..core import AcviConfig, InnerOptimizer
from ..vacvi import vacvi_run

# effectively unbounded when only a wall-time budget is given
_NO_CAP = 10**9

_ACVI_KEYS = {
    "name", "beta", "mu_init", "delta", "schedule", "outer_iters", "inner_iters",
    "x_solver", "y_solver", "tol_subproblem", "max_newton_iters", "y_init",
    "lambda_init", "x_init", "inner",
}


def _spec_error(msg):
    from .spec import SpecError

    return SpecError(msg)


def _check_keys(block, allowed):
    extra = set(block) - allowed
    if extra:
        raise _spec_error(
            f"method {block['name']!r}: unknown key(s) {', '.join(sorted(extra))}"
        )


def acvi_config(block):
    kw = {k: v for k, v in block.items() if k not in ("name", "schedule", "inner")}
    for key in ("y_init", "lambda_init", "x_init"):
        if kw.get(key) is not None:
            kw[key] = np.asarray(kw[key], dtype=float)
    if block.get("inner") is not None:
        kw["inner"] = InnerOptimizer(**block["inner"])
    if block.get("schedule") is not None:
        kw.pop("outer_iters", None)
        kw.pop("inner_iters", None)
        return AcviConfig.from_runs(block["schedule"], **kw)
    if isinstance(kw.get("inner_iters"), list):
        kw["inner_iters"] = tuple(kw["inner_iters"])
        kw.setdefault("outer_iters", len(kw["inner_iters"]))
    return AcviConfig(**kw)


class _Method:
    name = ""
    keys = {"name"}

    def check(self, block):
        _check_keys(block, self.keys)
        try:
            self.validate(block)
        except (TypeError, ValueError) as e:
            raise _spec_error(f"method {block['name']!r}: {e}") from None

    def validate(self, block):
        pass

    def label(self, block):
        return self.name.upper()


class _AcviMethod(_Method):
    keys = _ACVI_KEYS

    def __init__(self, name, runner, label):
        self.name, self.runner, self._label = name, runner, label

    def validate(self, block):
        cfg = acvi_config(block)
        if self.name == "acvi_inexact" and cfg.inner is None:
            raise ValueError("needs an 'inner' block")

    def label(self, block):
        return self._label

    def run(self, problem, block, budget, callback):
        cfg = acvi_config(block)
        return self.runner(
            problem, cfg, callback=callback,
            max_updates=budget.get("max_iters"),
            max_wall_time_s=budget.get("max_wall_time_s"),
        )


class _ProjectedMethod(_Method):
    keys = {"name", "gamma", "x0"}

    def __init__(self, name):
        self.name = name

    def validate(self, block):
        if not float(block.get("gamma", 0.1)) > 0:
            raise ValueError("gamma must be positive")

    def _extra(self, block):
        return {}

    def run(self, problem, block, budget, callback):
        iters = budget.get("max_iters")
        return run_baseline(
            problem, self.name, float(block.get("gamma", 0.1)),
            _NO_CAP if iters is None else iters,
            x0=block.get("x0"), callback=callback,
            max_wall_time_s=budget.get("max_wall_time_s"), **self._extra(block),
        )


class _LookaheadMethod(_ProjectedMethod):
    keys = {"name", "gamma", "x0", "k", "alpha", "base"}

    def __init__(self):
        super().__init__("la")

    def validate(self, block):
        super().validate(block)
        if int(block.get("k", 5)) < 1 or not 0 < float(block.get("alpha", 0.5)) <= 1:
            raise ValueError("lookahead needs k >= 1 and alpha in (0, 1]")
        if block.get("base", "gda") not in ("gda", "eg"):
            raise ValueError("lookahead base must be gda or eg")

    def _extra(self, block):
        return {
            "k": int(block.get("k", 5)),
            "alpha": float(block.get("alpha", 0.5)),
            "base": block.get("base", "gda"),
        }

    def label(self, block):
        return f"LA{int(block.get('k', 5))}-{block.get('base', 'gda').upper()}"


class _FrankWolfeMethod(_Method):
    name = "fw"
    keys = {"name", "gamma_rule", "C", "nu", "x0", "eps"}

    def validate(self, block):
        rule = block.get("gamma_rule", "2/(2+t)")
        if rule not in ("2/(2+t)", "adaptive"):
            raise ValueError(f"unknown gamma_rule {rule!r}")
        if rule == "adaptive" and (block.get("C") is None or block.get("nu") is None):
            raise ValueError("the adaptive step rule needs C and nu")

    def run(self, problem, block, budget, callback):
        iters = budget.get("max_iters")
        return fw_run(
            problem, _NO_CAP if iters is None else iters,
            eps=float(block.get("eps", 0.0)),
            gamma_rule=block.get("gamma_rule", "2/(2+t)"),
            C=block.get("C"), nu=block.get("nu"), x0=block.get("x0"),
            callback=callback, max_wall_time_s=budget.get("max_wall_time_s"),
        )


METHODS = {
    "acvi": _AcviMethod("acvi", acvi_run, "ACVI"),
    "acvi_inexact": _AcviMethod("acvi_inexact", acvi_inexact_run, "I-ACVI"),
    "vacvi": _AcviMethod("vacvi", vacvi_run, "v-ACVI"),
    "gda": _ProjectedMethod("gda"),
    "eg": _ProjectedMethod("eg"),
    "ogda": _ProjectedMethod("ogda"),
    "la": _LookaheadMethod(),
    "fw": _FrankWolfeMethod(),
}

METHOD_DESCRIPTIONS = {
    "acvi": "ADMM interior-point method with exact subproblem solves",
    "acvi_inexact": "ACVI with l warm-started first-order steps per subproblem",
    "vacvi": "ACVI variant with the barrier on x and the equality projection on y",
    "gda": "projected gradient descent-ascent",
    "eg": "projected extragradient",
    "ogda": "projected optimistic gradient descent-ascent",
    "la": "lookahead wrapper around projected GDA or EG",
    "fw": "Frank-Wolfe with a linear minimization oracle",
}


def method_label(block):
    return METHODS[block["name"]].label(block)
