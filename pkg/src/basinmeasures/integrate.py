"""Adaptive Dormand-Prince integration with capture, unsafe-set and switch events.

Trajectories are integrated in batches: every row carries its own time,
step size and error control, so a row's result never depends on which other
rows share its batch. Batches are formed from fixed-size index chunks, which
keeps output independent of the number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import AttractorSpec, SystemModel, TrajectoryOutcome, UsageError, Verdict

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# fifth minus fourth order weights, last entry multiplies the FSAL stage
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension: y(t + th*h) = y + h * sum_i K_i * (P_i . [th, th^2, th^3, th^4])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ERR_EXPONENT = -1 / 5
# interior points of each accepted step where events are checked
_THETAS = (0.25, 0.5, 0.75, 1.0)

CHUNK_SIZE = 256

_SAFE, _UNSAFE, _UNDETERMINED, _ACTIVE = 0, 1, 2, -1
_CODES = {_SAFE: Verdict.SAFE, _UNSAFE: Verdict.UNSAFE, _UNDETERMINED: Verdict.UNDETERMINED}


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and budgets. Defaults follow the usual ode45 settings."""

    rel_tol: float = 1e-3
    abs_tol: float = 1e-6
    initial_step: float = 1e-2
    max_step: float = 10.0
    t_max: float = 500.0
    max_steps: int = 200_000
    event_time_tol: float = 1e-6

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise UsageError("tolerances must be positive")
        if not (0 < self.initial_step <= self.max_step):
            raise UsageError("need 0 < initial_step <= max_step")
        if not self.t_max > 0:
            raise UsageError("t_max must be positive")
        if self.max_steps < 1:
            raise UsageError("max_steps must be positive")


def _evaluate(model: SystemModel, y, t, switched):
    with np.errstate(all="ignore"):
        out = np.asarray(model.rhs(y, t), dtype=float)
        if model.switch is not None and switched.any():
            out = out.copy()
            out[switched] = model.switch.rhs(y[switched], t[switched])
        if model.nonnegative:
            # a component sitting on its lower bound may not be pushed below it
            nn = list(model.nonnegative)
            out = out.copy()
            out[:, nn] = np.where(y[:, nn] <= 0, np.maximum(out[:, nn], 0.0), out[:, nn])
    return out


def _negativity(model, y_new, abs_tol):
    """How far below zero the nonnegative components went, in units of abs_tol."""
    if not model.nonnegative:
        return np.zeros(y_new.shape[0])
    with np.errstate(all="ignore"):
        return np.max(np.maximum(-y_new[:, list(model.nonnegative)], 0.0), axis=1) / abs_tol


def _project(model, ys):
    if not model.nonnegative:
        return ys
    nn = list(model.nonnegative)
    ys = ys.copy()
    ys[..., nn] = np.maximum(ys[..., nn], 0.0)
    return ys


def _rms(scaled):
    acc = scaled[:, 0] * scaled[:, 0]
    for i in range(1, scaled.shape[1]):
        acc = acc + scaled[:, i] * scaled[:, i]
    return np.sqrt(acc / scaled.shape[1])


def _attempt(model, y, t, h, f, switched):
    """One trial DOPRI5 step for every row. Returns stages, new state, new slope, error norm inputs."""
    m, dim = y.shape
    K = np.empty((7, m, dim))
    K[0] = f
    hc = h[:, None]
    with np.errstate(all="ignore"):
        for s in range(1, 6):
            dy = K[0] * _A[s][0]
            for j in range(1, s):
                dy = dy + K[j] * _A[s][j]
            K[s] = _evaluate(model, y + hc * dy, t + _C[s] * h, switched)
        dy = K[0] * _B[0]
        for j in range(2, 6):
            dy = dy + K[j] * _B[j]
        y_new = y + hc * dy
        K[6] = _evaluate(model, y_new, t + h, switched)
        err = K[0] * _E[0]
        for j in range(2, 7):
            err = err + K[j] * _E[j]
        err = hc * err
    return K, y_new, err


def _dense_coeffs(K):
    # (m, dim, 4)
    return np.einsum("smd,sk->mdk", K, _P)


def _dense(y, h, Q, theta):
    powers = np.array([theta, theta**2, theta**3, theta**4])
    return y + h[..., None] * (Q @ powers)


class _Batch:
    """Integration state for one chunk of initial conditions."""

    def __init__(self, model: SystemModel, attractor: AttractorSpec, ics: np.ndarray, cfg: IntegratorConfig):
        self.model = model
        self.att = attractor
        self.cfg = cfg
        n, dim = ics.shape
        self.ics = ics
        self.code = np.full(n, _ACTIVE)
        self.return_time = np.full(n, np.nan)
        self.terminal = ics.copy()
        self.steps = np.zeros(n, dtype=np.int64)
        self.capture_enabled = True

    def _resolve(self, rows, code, terminal, rt=None):
        self.code[rows] = code
        self.terminal[rows] = terminal
        if rt is not None:
            self.return_time[rows] = rt

    def _capture_mask(self, ys, switched):
        inside = self.att.capture_distance(ys) <= self.att.capture_radius
        if self.model.switch is not None and self.model.switch.disables_capture:
            inside = inside & ~switched
        return inside

    def _unsafe_mask(self, ys):
        with np.errstate(all="ignore"):
            out = ~np.asarray(self.model.domain(ys), dtype=bool) | self.att.is_unsafe(ys)
            return out | ~np.all(np.isfinite(ys), axis=-1)

    def _switch_mask(self, ys, switched):
        if self.model.switch is None:
            return np.zeros(ys.shape[0], dtype=bool)
        with np.errstate(all="ignore"):
            return (np.asarray(self.model.switch.indicator(ys)) >= 0) & ~switched

    def run(self):
        cfg, att = self.cfg, self.att
        n, dim = self.ics.shape
        y = self.ics.copy()
        t = np.zeros(n)
        idx = np.arange(n)
        switched = np.zeros(n, dtype=bool)

        unsafe0 = self._unsafe_mask(y)
        switched = self._switch_mask(y, switched) & ~unsafe0
        if self.model.switch is not None and self.model.switch.unsafe_after:
            unsafe0 = unsafe0 | switched
        self._resolve(idx[unsafe0], _UNSAFE, y[unsafe0])
        inside = self._capture_mask(y, switched) & ~unsafe0
        entry = np.where(inside, 0.0, np.nan)
        if att.dwell_time == 0:
            self._resolve(idx[inside], _SAFE, y[inside], 0.0)

        keep = self.code == _ACTIVE
        idx, y, t, switched, inside, entry = idx[keep], y[keep], t[keep], switched[keep], inside[keep], entry[keep]
        h = np.full(idx.size, cfg.initial_step)
        f = _evaluate(self.model, y, t, switched)
        rejected_last = np.zeros(idx.size, dtype=bool)

        while idx.size:
            h = np.minimum(np.minimum(h, cfg.max_step), cfg.t_max - t)
            K, y_new, err = _attempt(self.model, y, t, h, f, switched)
            with np.errstate(all="ignore"):
                scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                err_norm = _rms(err / scale)
                # steps that leave the nonnegative orthant by more than abs_tol are rejected
                err_norm = np.maximum(err_norm, _negativity(self.model, y_new, cfg.abs_tol))
            finite = np.isfinite(err_norm) & np.all(np.isfinite(y_new), axis=1) & np.all(np.isfinite(K[6]), axis=1)
            accept = finite & (err_norm < 1.0)
            if self.model.nonnegative:
                clipped = accept & np.any(y_new[:, list(self.model.nonnegative)] < 0, axis=1)
                if clipped.any():
                    y_new[clipped] = _project(self.model, y_new[clipped])
                    K[6, clipped] = _evaluate(self.model, y_new[clipped], t[clipped] + h[clipped], switched[clipped])

            with np.errstate(all="ignore"):
                factor = np.where(err_norm == 0, _MAX_FACTOR, _SAFETY * err_norm**_ERR_EXPONENT)
            factor = np.where(finite, factor, _MIN_FACTOR)

            # rejected rows: shrink and retry
            rej = ~accept
            h_next = h.copy()
            h_next[rej] = h[rej] * np.clip(factor[rej], _MIN_FACTOR, 1.0)
            underflow = rej & (h_next < 10 * np.finfo(float).eps * np.maximum(1.0, np.abs(t)))
            if underflow.any():
                # repeated non-finite trial states mean the solution blew up
                blown = underflow & ~finite
                self._resolve(idx[blown], _UNSAFE, y[blown])
                stuck = underflow & finite
                self._resolve(idx[stuck], _UNDETERMINED, y[stuck])

            # accepted rows: move forward, then look for events inside the step
            acc = np.flatnonzero(accept)
            grow = np.minimum(_MAX_FACTOR, factor[acc])
            grow = np.where(rejected_last[acc], np.minimum(grow, 1.0), grow)
            h_next[acc] = h[acc] * grow
            rejected_last = rej.copy()

            if acc.size:
                self._handle_accepted(acc, idx, y, t, h, K, y_new, switched, inside, entry)
                # _handle_accepted writes the post-step state in place
                t_acc = t[acc]
                self.steps[idx[acc]] += 1
                active_acc = self.code[idx[acc]] == _ACTIVE
                out_of_time = active_acc & (t_acc >= cfg.t_max)
                out_of_steps = active_acc & (self.steps[idx[acc]] >= cfg.max_steps)
                done = acc[out_of_time | out_of_steps]
                self._resolve(idx[done], _UNDETERMINED, y[done])
                f[acc] = self._post_f

            keep = self.code[idx] == _ACTIVE
            idx, y, t, h, f = idx[keep], y[keep], t[keep], h_next[keep], f[keep]
            switched, inside, entry, rejected_last = switched[keep], inside[keep], entry[keep], rejected_last[keep]

        return self.code, self.return_time, self.terminal, self.steps

    def _handle_accepted(self, acc, idx, y, t, h, K, y_new, switched, inside, entry):
        att = self.att
        ya, ta, ha = y[acc], t[acc], h[acc]
        sw_a = switched[acc]
        Q = _dense_coeffs(K[:, acc])
        samples = [_project(self.model, _dense(ya, ha, Q, th)) for th in _THETAS[:-1]] + [y_new[acc]]
        Ys = np.stack(samples)  # (4, m, dim)

        cap = np.stack([self._capture_mask(s, sw_a) for s in samples])
        uns = np.stack([self._unsafe_mask(s) for s in samples])
        swt = np.stack([self._switch_mask(s, sw_a) for s in samples])
        ins_a = inside[acc]
        interesting = uns.any(0) | swt.any(0) | (cap != ins_a[None, :]).any(0)
        if att.dwell_time > 0:
            interesting |= ins_a & (ta + ha - entry[acc] >= att.dwell_time)

        post_y = y_new[acc].copy()
        post_t = ta + ha
        post_f = K[6, acc].copy()

        for r in np.flatnonzero(interesting):
            row = acc[r]
            out = self._scan_row(r, ya[r], ta[r], ha[r], Q[r], Ys[:, r], cap[:, r], uns[:, r], swt[:, r],
                                 bool(ins_a[r]), float(entry[row]), bool(sw_a[r]), idx[row])
            if out is None:
                continue
            kind, payload = out
            if kind == "state":
                inside[row], entry[row] = payload
            elif kind == "truncate":
                th_w, y_w, ins_w, ent_w = payload
                post_y[r] = y_w
                post_t[r] = ta[r] + th_w * ha[r]
                switched[row] = True
                inside[row], entry[row] = ins_w, ent_w
                post_f[r] = _evaluate(self.model, y_w[None, :], post_t[r:r + 1], np.ones(1, dtype=bool))[0]

        y[acc] = post_y
        t[acc] = post_t
        self._post_f = post_f

    def _locate(self, y, h, Q, lo, hi, fires):
        """Bisect on the dense output for the first theta in (lo, hi] where ``fires`` holds."""
        tol = self.cfg.event_time_tol
        while (hi - lo) * h > tol:
            mid = 0.5 * (lo + hi)
            if fires(_project(self.model, _dense(y, h, Q, mid)[None, :])):
                hi = mid
            else:
                lo = mid
        return hi

    def _scan_row(self, r, y, t, h, Q, Ys, cap, uns, swt, inside, entry, switched, gidx):
        att = self.att
        dwell = att.dwell_time
        sw_arr = np.array([switched])
        theta_prev = 0.0
        for j, th in enumerate(_THETAS):
            if uns[j]:
                self._resolve(gidx, _UNSAFE, Ys[j])
                return None
            th_w = None
            if swt[j]:
                th_w = self._locate(y, h, Q, theta_prev, th,
                                    lambda s: bool(self._switch_mask(s, sw_arr)[0]))
            th_c = None
            if cap[j] and not inside:
                th_c = self._locate(y, h, Q, theta_prev, th,
                                    lambda s: bool(self._capture_mask(s, sw_arr)[0]))
            if th_w is not None and (th_c is None or th_w < th_c):
                y_w = _project(self.model, _dense(y, h, Q, th_w))
                if self.model.switch.unsafe_after:
                    self._resolve(gidx, _UNSAFE, y_w)
                    return None
                keep_inside = inside and not (self.model.switch.disables_capture)
                return "truncate", (th_w, y_w, keep_inside, entry if keep_inside else np.nan)
            if th_c is not None:
                t_c = t + th_c * h
                if dwell == 0:
                    self._resolve(gidx, _SAFE, _project(self.model, _dense(y, h, Q, th_c)), t_c)
                    return None
                inside, entry = True, t_c
            elif inside and not cap[j]:
                inside, entry = False, np.nan
            if inside and dwell > 0 and t + th * h - entry >= dwell:
                self._resolve(gidx, _SAFE, Ys[j], entry)
                return None
            if th_w is not None:
                y_w = _project(self.model, _dense(y, h, Q, th_w))
                if self.model.switch.unsafe_after:
                    self._resolve(gidx, _UNSAFE, y_w)
                    return None
                keep_inside = inside and not (self.model.switch.disables_capture)
                return "truncate", (th_w, y_w, keep_inside, entry if keep_inside else np.nan)
            theta_prev = th
        return "state", (inside, entry)


def _classify_chunk(model, attractor, ics, cfg):
    return _Batch(model, attractor, ics, cfg).run()


def _to_outcomes(ics, code, rt, term, steps) -> list[TrajectoryOutcome]:
    out = []
    for i in range(ics.shape[0]):
        verdict = _CODES[int(code[i])]
        out.append(TrajectoryOutcome(
            initial_condition=ics[i].copy(),
            verdict=verdict,
            return_time=float(rt[i]) if verdict is Verdict.SAFE else None,
            terminal_state=term[i].copy(),
            steps_taken=int(steps[i]),
        ))
    return out


def classify_many(model: SystemModel, attractor: AttractorSpec, ics, cfg: IntegratorConfig | None = None,
                  workers: int = 1, chunk_size: int = CHUNK_SIZE) -> list[TrajectoryOutcome]:
    """Classify many initial conditions; output is ordered by input index.

    Work is split into chunks of ``chunk_size`` consecutive indices. The
    chunking does not depend on ``workers``, so results are identical for
    any worker count.
    """
    cfg = cfg or IntegratorConfig()
    ics = np.asarray(ics, dtype=float).reshape(-1, model.dim)
    if ics.shape[0] == 0:
        return []
    bounds = [(s, min(s + chunk_size, ics.shape[0])) for s in range(0, ics.shape[0], chunk_size)]
    if workers <= 1 or len(bounds) == 1:
        parts = [_classify_chunk(model, attractor, ics[a:b], cfg) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_classify_chunk, model, attractor, ics[a:b], cfg) for a, b in bounds]
            parts = [fut.result() for fut in futures]
    code = np.concatenate([p[0] for p in parts])
    rt = np.concatenate([p[1] for p in parts])
    term = np.concatenate([p[2] for p in parts])
    steps = np.concatenate([p[3] for p in parts])
    return _to_outcomes(ics, code, rt, term, steps)


def classify(model: SystemModel, attractor: AttractorSpec, ic, cfg: IntegratorConfig | None = None) -> TrajectoryOutcome:
    """Integrate one initial condition until capture, an unsafe event or budget exhaustion."""
    return classify_many(model, attractor, np.asarray(ic, dtype=float).reshape(1, model.dim), cfg)[0]


def step(model: SystemModel, state, t: float, h: float, cfg: IntegratorConfig | None = None):
    """Take one accepted adaptive step from ``(state, t)`` starting with trial size ``h``.

    Rejected trials shrink ``h`` until the error estimate is within
    tolerance. Returns ``(new_state, new_t, h_next, error_norm)``.
    """
    cfg = cfg or IntegratorConfig()
    if not h > 0:
        raise UsageError("step size must be positive")
    y = np.asarray(state, dtype=float).reshape(1, model.dim)
    if not np.all(np.isfinite(y)):
        raise UsageError("state must be finite")
    tt = np.array([float(t)])
    sw = np.zeros(1, dtype=bool)
    f = _evaluate(model, y, tt, sw)
    hh = np.array([min(float(h), cfg.max_step)])
    while True:
        K, y_new, err = _attempt(model, y, tt, hh, f, sw)
        with np.errstate(all="ignore"):
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            en = float(max(_rms(err / scale)[0], _negativity(model, y_new, cfg.abs_tol)[0]))
        if math.isfinite(en) and en < 1.0:
            factor = _MAX_FACTOR if en == 0 else min(_MAX_FACTOR, _SAFETY * en**_ERR_EXPONENT)
            h_next = min(hh[0] * factor, cfg.max_step)
            return _project(model, y_new)[0], float(tt[0] + hh[0]), h_next, en
        shrink = _MIN_FACTOR if not math.isfinite(en) else max(_MIN_FACTOR, _SAFETY * en**_ERR_EXPONENT)
        hh = hh * shrink
        if hh[0] < 10 * np.finfo(float).eps * max(1.0, abs(t)):
            raise FloatingPointError("step size underflow")


def integrate_to(model: SystemModel, state, t_end: float, cfg: IntegratorConfig | None = None,
                 t0: float = 0.0) -> np.ndarray:
    """Plain adaptive integration from ``t0`` to ``t_end`` without events."""
    cfg = cfg or IntegratorConfig()
    y = np.asarray(state, dtype=float)
    t, h = float(t0), cfg.initial_step
    while t < t_end:
        h = min(h, t_end - t)
        y, t_new, h, _ = step(model, y, t, h, cfg)
        t = t_end if t_end - t_new < 1e-14 * max(1.0, abs(t_end)) else t_new
    return y
