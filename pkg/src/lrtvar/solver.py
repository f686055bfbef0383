"""Block-coordinate fitting of the factored time-varying linear model.

The regularized cost is

    C = 1/2 sum_k ||Y_k - U1 diag(U3[k]) U2' X_k||_F^2
        + 1/(2 eta) (||U1||_F^2 + ||U2||_F^2 + ||U3||_F^2)
        + beta * R(U3)

minimized by cycling exact or iterative solves over the three factor
blocks: a dense R x R solve for U1, matrix-free conjugate gradients on a
Sylvester-type system for U2, and per-window solves (no smoothing), CG
(spline smoothing), or accelerated proximal gradient (total-variation
smoothing) for U3.  Every update is non-increasing in C, so the outer cost
trace descends monotonically up to subproblem tolerances.

Nothing in the fit path ever forms an N x N or N_in x N_in matrix; all
contractions go through the data tensors and the R-column factors, which is
what makes large state dimensions tractable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cp_model import CpFactors
from .errors import DegenerateDataError, DimensionMismatchError, NonPositiveEtaError
from .regularizers import Regularizer, tv_prox_columns
from .windowing import SnapshotPair


@dataclass(frozen=True)
class WarmRestart:
    """Optional mid-run restart: after ``at_iter`` outer iterations the right
    spatial modes are overwritten with the left ones, which helps when the
    solution is expected to have nearly equal spatial modes."""

    at_iter: int
    copy_U1_to_U2: bool = True


@dataclass(frozen=True)
class Hyperparams:
    """All solver and model knobs.

    ``init_noise_spatial``/``init_noise_temporal`` default to 0.5/sqrt(dim)
    of the factor they perturb (dim = N or N_in for spatial, T for temporal)
    when left as None.
    """

    R: int
    eta: float
    reg: Regularizer = field(default_factory=Regularizer)
    max_outer_iters: int = 1000
    rtol: float = 1e-4
    atol: float = 1e-6
    cg_max_iters: int = 24
    pg_max_iters: int = 40
    cg_tol: float = 1e-9
    seed: int = 0
    init_noise_spatial: Optional[float] = None
    init_noise_temporal: Optional[float] = None
    warm_restart: Optional[WarmRestart] = None

    def __post_init__(self):
        if self.R < 1:
            raise ValueError(f"rank must be >= 1, got {self.R}")
        if self.eta <= 0:
            raise NonPositiveEtaError(f"eta must be > 0, got {self.eta}")
        for name in ("max_outer_iters", "cg_max_iters", "pg_max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.rtol < 0 or self.atol < 0:
            raise ValueError("tolerances must be >= 0")


@dataclass
class FitReport:
    """Per-run diagnostics.

    ``cost_trace[0]`` is the cost at initialization; each outer iteration
    appends one entry after its temporal update.  Without a warm restart the
    trace is non-increasing up to a slack of 1e-8 * (1 + |C|) per step.
    """

    cost_trace: list
    rmse_trace: list
    iterations: int
    termination: str
    wall_seconds: float
    subproblem_stats: dict

    def write_trace_csv(self, path, manifest: Optional[str] = None) -> None:
        """Trace as CSV with columns (iteration, cost, rmse); row 0 is the
        initialization."""
        with open(path, "w", encoding="utf-8") as fh:
            if manifest:
                fh.write(f"# {manifest}\n")
            fh.write("iteration,cost,rmse\n")
            for i, (c, r) in enumerate(zip(self.cost_trace, self.rmse_trace)):
                fh.write(f"{i},{c:.17g},{r:.17g}\n")

    def summary(self) -> str:
        lines = [
            f"iterations: {self.iterations}",
            f"termination: {self.termination}",
            f"final cost: {self.cost_trace[-1]:.17g}",
            f"final rmse: {self.rmse_trace[-1]:.17g}",
            f"wall seconds: {self.wall_seconds:.3f}",
        ]
        return "\n".join(lines)


def _check_dims(model: CpFactors, data: SnapshotPair) -> None:
    if model.N != data.N or model.N_in != data.N_in or model.T != data.T:
        raise DimensionMismatchError(
            f"model dims (N={model.N}, N_in={model.N_in}, T={model.T}) vs "
            f"data dims (N={data.N}, N_in={data.N_in}, T={data.T})"
        )


def _predictions(model: CpFactors, data: SnapshotPair) -> np.ndarray:
    """Stack of per-window predictions U1 diag(U3[k]) U2' X_k, shape (N, M, T)."""
    G = np.einsum("imk,ir->rmk", data.X, model.U2)  # U2' X_k
    G *= model.U3.T[:, None, :]  # diag scaling by window loadings
    return np.einsum("ir,rmk->imk", model.U1, G)


def loss(model: CpFactors, data: SnapshotPair) -> float:
    """Unregularized squared error: 1/2 sum_k ||Y_k - A_k X_k||_F^2."""
    _check_dims(model, data)
    resid = data.Y - _predictions(model, data)
    return 0.5 * float(np.sum(resid * resid))


def rmse(model: CpFactors, data: SnapshotPair) -> float:
    """Average one-step prediction error per channel:
    sqrt(sum_k ||Y_k - A_k X_k||_F^2 / (N M T))."""
    return float(np.sqrt(2.0 * loss(model, data) / (data.N * data.M * data.T)))


def cost(model: CpFactors, data: SnapshotPair, params: Hyperparams) -> float:
    """Full regularized objective: loss + ridge + beta * temporal penalty."""
    from .regularizers import tikhonov_penalty

    return (
        loss(model, data)
        + tikhonov_penalty(model.U1, model.U2, model.U3, params.eta)
        + params.reg.penalty(model.U3)
    )


# ---------------------------------------------------------------------------
# block gradients (smooth part of the cost: loss + ridge [+ spline])


def grad_left(model: CpFactors, data: SnapshotPair, eta: float) -> np.ndarray:
    """Gradient of (loss + ridge) in U1."""
    _check_dims(model, data)
    H = np.einsum("imk,ir->rmk", data.X, model.U2)
    H *= model.U3.T[:, None, :]  # H_k = diag(U3[k]) U2' X_k
    S = np.einsum("rmk,smk->rs", H, H)
    B = np.einsum("imk,rmk->ir", data.Y, H)
    return model.U1 @ S - B + model.U1 / eta


def grad_right(model: CpFactors, data: SnapshotPair, eta: float) -> np.ndarray:
    """Gradient of (loss + ridge) in U2; never forms X_k X_k'."""
    _check_dims(model, data)
    return _right_operator(model, data, eta, model.U2) - _right_rhs(model, data)


def grad_temporal(model: CpFactors, data: SnapshotPair, params: Hyperparams) -> np.ndarray:
    """Gradient of the smooth cost in U3: loss + ridge, plus the spline term
    when that regularizer is active (the TV term is nonsmooth and excluded)."""
    _check_dims(model, data)
    C, b = _temporal_quadratic(model, data)
    g = np.einsum("krs,ks->kr", C, model.U3) - b + model.U3 / params.eta
    if params.reg.kind == "spline" and params.reg.beta > 0:
        g += params.reg.beta * _second_difference(model.U3)
    return g


# ---------------------------------------------------------------------------
# block updates


def update_left(model: CpFactors, data: SnapshotPair, eta: float) -> np.ndarray:
    """Exact minimizer of the cost over U1 (R x R ridge-damped solve)."""
    _check_dims(model, data)
    H = np.einsum("imk,ir->rmk", data.X, model.U2)
    H *= model.U3.T[:, None, :]
    S = np.einsum("rmk,smk->rs", H, H)
    B = np.einsum("imk,rmk->ir", data.Y, H)
    S[np.diag_indices_from(S)] += 1.0 / eta
    return np.linalg.solve(S, B.T).T


def _right_operator(model: CpFactors, data: SnapshotPair, eta: float, U: np.ndarray) -> np.ndarray:
    """Apply U -> sum_k X_k X_k' U R_k + U/eta with R_k = diag(U3[k]) U1'U1 diag(U3[k])."""
    P = model.U1.T @ model.U1
    W = np.einsum("imk,ir->mrk", data.X, U)  # X_k' U
    W *= model.U3.T[None, :, :]
    Z = np.einsum("mrk,rs->msk", W, P)
    Z *= model.U3.T[None, :, :]
    return np.einsum("imk,msk->is", data.X, Z) + U / eta


def _right_rhs(model: CpFactors, data: SnapshotPair) -> np.ndarray:
    """B = sum_k X_k Y_k' U1 diag(U3[k])."""
    F = np.einsum("imk,ir->mrk", data.Y, model.U1)  # Y_k' U1
    F *= model.U3.T[None, :, :]
    return np.einsum("imk,mrk->ir", data.X, F)


def update_right(
    model: CpFactors, data: SnapshotPair, eta: float, max_iters: int = 24, tol: float = 1e-9
) -> tuple[np.ndarray, int]:
    """Approximate minimizer of the cost over U2 by matrix-valued CG.

    The normal equations are a Sylvester-type system
    sum_k L_k U2 R_k + U2/eta = B with L_k = X_k X_k' applied matrix-free.
    CG warm-starts from the current U2, so the quadratic objective (hence the
    cost) never increases.  Returns (new U2, CG iterations used).
    """
    _check_dims(model, data)
    B = _right_rhs(model, data)
    U = model.U2.copy()
    r = B - _right_operator(model, data, eta, U)
    p = r.copy()
    rs = float(np.sum(r * r))
    b_norm = float(np.linalg.norm(B))
    threshold = tol * b_norm if b_norm > 0 else 0.0
    n_iters = 0
    for _ in range(max_iters):
        if np.sqrt(rs) <= threshold:
            break
        Ap = _right_operator(model, data, eta, p)
        alpha = rs / float(np.sum(p * Ap))
        U += alpha * p
        r -= alpha * Ap
        rs_new = float(np.sum(r * r))
        p = r + (rs_new / rs) * p
        rs = rs_new
        n_iters += 1
    return U, n_iters


def _temporal_quadratic(model: CpFactors, data: SnapshotPair) -> tuple[np.ndarray, np.ndarray]:
    """Per-window quadratic data: C[k] = (U2'X_k X_k'U2) * (U1'U1) (Hadamard)
    and b[k] = diag(U2' X_k Y_k' U1), so the smooth loss in U3 is
    sum_k 1/2 u_k' C_k u_k - b_k' u_k + const with u_k = U3[k]."""
    G = np.einsum("imk,ir->rmk", data.X, model.U2)  # U2' X_k
    GG = np.einsum("rmk,smk->krs", G, G)
    P = model.U1.T @ model.U1
    C = GG * P[None, :, :]
    F = np.einsum("imk,ir->mrk", data.Y, model.U1)  # Y_k' U1
    b = np.einsum("rmk,mrk->kr", G, F)
    return C, b


def _second_difference(U3: np.ndarray) -> np.ndarray:
    """D'D applied to each column (free boundaries)."""
    out = np.empty_like(U3)
    d = U3[:-1] - U3[1:]
    out[0] = d[0]
    out[1:-1] = d[1:] - d[:-1]
    out[-1] = -d[-1]
    return out


def update_temporal(model: CpFactors, data: SnapshotPair, params: Hyperparams) -> tuple[np.ndarray, int]:
    """Minimize the cost over U3; returns (new U3, inner iterations used).

    Without temporal smoothing the problem decouples into T exact R x R
    ridge solves.  The spline penalty couples the windows through a
    tridiagonal term and is solved by warm-started CG; the TV penalty is
    handled by monotone FISTA with backtracking, using the exact 1-D TV
    prox column by column.
    """
    _check_dims(model, data)
    C, b = _temporal_quadratic(model, data)
    eta = params.eta
    beta = params.reg.beta

    if params.reg.kind == "none" or beta == 0.0:
        A = C.copy()
        idx = np.arange(model.R)
        A[:, idx, idx] += 1.0 / eta
        return np.linalg.solve(A, b[..., None])[..., 0], 0

    if params.reg.kind == "spline":
        return _temporal_cg_spline(C, b, model.U3, eta, beta, params.cg_max_iters, params.cg_tol)

    return _temporal_fista_tv(C, b, model.U3, eta, beta, params.pg_max_iters)


def _temporal_cg_spline(C, b, U3_init, eta, beta, max_iters, tol):
    def operate(U):
        out = np.einsum("krs,ks->kr", C, U) + U / eta
        out += beta * _second_difference(U)
        return out

    U = U3_init.copy()
    r = b - operate(U)
    p = r.copy()
    rs = float(np.sum(r * r))
    b_norm = float(np.linalg.norm(b))
    threshold = tol * b_norm if b_norm > 0 else 0.0
    n_iters = 0
    for _ in range(max_iters):
        if np.sqrt(rs) <= threshold:
            break
        Ap = operate(p)
        alpha = rs / float(np.sum(p * Ap))
        U += alpha * p
        r -= alpha * Ap
        rs_new = float(np.sum(r * r))
        p = r + (rs_new / rs) * p
        rs = rs_new
        n_iters += 1
    return U, n_iters


def _temporal_fista_tv(C, b, U3_init, eta, beta, max_iters):
    """Monotone FISTA with backtracking on the smooth quadratic part.

    Nesterov momentum restarts whenever the objective would increase, in
    which case a plain proximal-gradient step from the previous iterate is
    taken instead; that step cannot increase the objective, so the returned
    point never exceeds the starting objective.
    """
    from .regularizers import tv_penalty

    def f_smooth(U):
        return float(0.5 * np.einsum("ks,krs,kr->", U, C, U) - np.sum(b * U) + np.sum(U * U) / (2 * eta))

    def grad(U):
        return np.einsum("krs,ks->kr", C, U) - b + U / eta

    def objective(U):
        return f_smooth(U) + beta * tv_penalty(U)

    u_prev = U3_init.copy()
    z = u_prev.copy()
    obj_prev = objective(u_prev)
    t_momentum = 1.0
    step = 1.0
    n_iters = 0

    for _ in range(max_iters):
        g = grad(z)
        fz = f_smooth(z)
        while True:
            candidate = tv_prox_columns(z - step * g, beta * step)
            diff = candidate - z
            quad = fz + float(np.sum(g * diff)) + float(np.sum(diff * diff)) / (2 * step)
            if f_smooth(candidate) <= quad + 1e-12 * (1 + abs(quad)):
                break
            step *= 0.5
        obj_candidate = objective(candidate)
        if obj_candidate > obj_prev:
            # restart: momentum off, plain prox step from the previous iterate
            t_momentum = 1.0
            g = grad(u_prev)
            fz = f_smooth(u_prev)
            while True:
                candidate = tv_prox_columns(u_prev - step * g, beta * step)
                diff = candidate - u_prev
                quad = fz + float(np.sum(g * diff)) + float(np.sum(diff * diff)) / (2 * step)
                if f_smooth(candidate) <= quad + 1e-12 * (1 + abs(quad)):
                    break
                step *= 0.5
            obj_candidate = objective(candidate)
            if obj_candidate > obj_prev:
                candidate = u_prev
                obj_candidate = obj_prev
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_momentum * t_momentum))
        z = candidate + ((t_momentum - 1.0) / t_next) * (candidate - u_prev)
        u_prev = candidate
        obj_prev = obj_candidate
        t_momentum = t_next
        n_iters += 1
    return u_prev, n_iters


# ---------------------------------------------------------------------------
# initialization and the outer loop


def initialize(data: SnapshotPair, params: Hyperparams) -> CpFactors:
    """Spectral initialization from a single global linear fit.

    All windows are concatenated into global snapshot matrices X, Y; the
    one-model fit A = Y pinv(X) is formed in factored form (never as a dense
    N x N_in matrix) and its leading R singular vectors seed the spatial
    modes.  Temporal modes start as the constant matrix 1/sqrt(T).  Extra
    columns beyond the available spectrum are filled with constant unit
    vectors, and Gaussian noise (seeded, with the configured scales) breaks
    the column symmetry.
    """
    Xg = data.X.transpose(0, 2, 1).reshape(data.N_in, data.T * data.M)
    Yg = data.Y.transpose(0, 2, 1).reshape(data.N, data.T * data.M)
    x_norm = np.linalg.norm(Xg)
    if x_norm == 0.0:
        raise DegenerateDataError("predictor tensor is identically zero")

    # A = Y pinv(X) = (Y V S^-1) Ux'; its SVD comes from a QR of the thin
    # left product followed by an SVD of a small core, keeping every
    # intermediate at O(N * min(N_in, T*M)) memory.
    Ux, s, Vtx = np.linalg.svd(Xg, full_matrices=False)
    keep = s > s[0] * 1e-12
    Ux, s, Vtx = Ux[:, keep], s[keep], Vtx[keep]
    Bmat = (Yg @ Vtx.T) / s
    Q, Rq = np.linalg.qr(Bmat)
    Uc, _, Vtc = np.linalg.svd(Rq @ Ux.T, full_matrices=False)
    U_A = Q @ Uc
    V_A = Vtc.T

    R = params.R
    N, N_in, T = data.N, data.N_in, data.T
    q = U_A.shape[1]
    U1 = np.empty((N, R))
    U2 = np.empty((N_in, R))
    take = min(R, q)
    U1[:, :take] = U_A[:, :take]
    U2[:, :take] = V_A[:, :take]
    if R > take:
        U1[:, take:] = 1.0 / np.sqrt(N)
        U2[:, take:] = 1.0 / np.sqrt(N_in)
    U3 = np.full((T, R), 1.0 / np.sqrt(T))

    sd1 = params.init_noise_spatial
    sd3 = params.init_noise_temporal
    rng = np.random.default_rng(params.seed)
    noise_u1 = rng.standard_normal((N, R))
    noise_u2 = rng.standard_normal((N_in, R))
    noise_u3 = rng.standard_normal((T, R))
    U1 += (0.5 / np.sqrt(N) if sd1 is None else sd1) * noise_u1
    U2 += (0.5 / np.sqrt(N_in) if sd1 is None else sd1) * noise_u2
    U3 += (0.5 / np.sqrt(T) if sd3 is None else sd3) * noise_u3
    return CpFactors(U1=U1, U2=U2, U3=U3, affine=data.affine)


def fit(data: SnapshotPair, params: Hyperparams, verbose: bool = False) -> tuple[CpFactors, FitReport]:
    """Alternating block minimization of the regularized cost.

    Cycles U1 -> U2 -> U3 updates, recording cost and prediction error after
    each full cycle, until the cost decrease falls below the relative or
    absolute tolerance or the iteration cap is reached.  ``verbose`` prints
    one line per outer iteration.
    """
    if params.warm_restart is not None and params.warm_restart.copy_U1_to_U2 and data.N != data.N_in:
        raise ValueError("warm restart copies U1 into U2 and needs N_in == N (no lags, no affine row)")

    t_start = time.perf_counter()
    model = initialize(data, params)
    cost_trace = [cost(model, data, params)]
    rmse_trace = [rmse(model, data)]
    stats = {"cg_iters_right": [], "inner_iters_temporal": []}

    termination = "max_iters"
    iterations = 0
    prev_cost: Optional[float] = cost_trace[0]
    for it in range(1, params.max_outer_iters + 1):
        U1 = update_left(model, data, params.eta)
        model = CpFactors(U1=U1, U2=model.U2, U3=model.U3, affine=model.affine)
        U2, cg_iters = update_right(model, data, params.eta, params.cg_max_iters, params.cg_tol)
        model = CpFactors(U1=model.U1, U2=U2, U3=model.U3, affine=model.affine)
        U3, inner_iters = update_temporal(model, data, params)
        model = CpFactors(U1=model.U1, U2=model.U2, U3=U3, affine=model.affine)

        iterations = it
        c = cost(model, data, params)
        cost_trace.append(c)
        rmse_trace.append(rmse(model, data))
        stats["cg_iters_right"].append(cg_iters)
        stats["inner_iters_temporal"].append(inner_iters)
        if verbose:
            print(f"iter {it}: cost={c:.17g} rmse={rmse_trace[-1]:.17g} cg={cg_iters} inner={inner_iters}")

        if prev_cost is not None:
            if prev_cost > 0 and abs(c - prev_cost) / prev_cost < params.rtol:
                termination = "rtol"
                break
            if abs(c - prev_cost) < params.atol:
                termination = "atol"
                break
        prev_cost = c

        if params.warm_restart is not None and it == params.warm_restart.at_iter:
            if params.warm_restart.copy_U1_to_U2:
                model = CpFactors(U1=model.U1, U2=model.U1.copy(), U3=model.U3, affine=model.affine)
            prev_cost = None  # cost jumped; do not stop on the next comparison

    report = FitReport(
        cost_trace=cost_trace,
        rmse_trace=rmse_trace,
        iterations=iterations,
        termination=termination,
        wall_seconds=time.perf_counter() - t_start,
        subproblem_stats=stats,
    )
    return model, report
