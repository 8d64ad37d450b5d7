"""Learned metriplectic operators and thermodynamically consistent rollout.

A feed-forward network maps a latent state x to a raw vector that is
unpacked into four operators: a skew-symmetric matrix L driving the
reversible part of the motion, a symmetric matrix M driving dissipation,
and discrete energy/entropy gradients DE and DS. One explicit Euler step
is then

    x_next = x + dt * (L @ DE + M @ DS).

Skewness and symmetry hold exactly by construction; the orthogonality
conditions L @ DS = 0 and M @ DE = 0 (energy has nothing to do with
dissipation, entropy nothing with reversible transport) are enforced
through a penalty, the sum of squares of both products.

Two parametrizations of M are available:

``sym``
    Paper-style free symmetric matrix from its upper triangle; the
    orthogonality conditions are driven small only by the penalty.

``psd``
    M = A @ A.T from a lower-triangular factor, plus exact null-space
    projections L -> P L P with P = I - ds ds^T / |ds|^2 (and the mirror
    projection of M against DE). Both orthogonality conditions then hold
    to machine precision, so the recorded energy rate vanishes and the
    entropy rate is a non-negative quadratic form, step by step.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigurationError, IntegrationError, TrainingError
from .nn import Adam, LrSchedule, mlp
from .validation import as_matrix, as_vector

M_PARAMETRIZATIONS = ("sym", "psd")


def operator_sizes(d):
    """(skew entries, symmetric entries, total raw output size) for dim d."""
    n_skew = d * (d - 1) // 2
    n_sym = d * (d + 1) // 2
    return n_skew, n_sym, n_skew + n_sym + 2 * d


@dataclass
class GenericOperators:
    """One state's operator quadruple."""

    L: np.ndarray
    M: np.ndarray
    de: np.ndarray
    ds: np.ndarray

    @property
    def dim(self):
        return len(self.de)


class _OperatorCodec:
    """Raw network outputs <-> batched operator tensors, with gradients."""

    def __init__(self, d, m_parametrization="sym"):
        if m_parametrization not in M_PARAMETRIZATIONS:
            raise ConfigurationError(
                f"m_parametrization must be one of {M_PARAMETRIZATIONS}"
            )
        self.d = d
        self.mode = m_parametrization
        self.n_skew, self.n_sym, self.d_out = operator_sizes(d)
        self.iu_strict = np.triu_indices(d, k=1)
        self.iu = np.triu_indices(d)
        self.il = np.tril_indices(d)

    # -- forward -----------------------------------------------------------

    def forward(self, raw):
        """raw (n, d_out) -> L, M, DE, DS tensors plus a backward cache."""
        raw = as_matrix(raw, cols=self.d_out, name="raw operator output")
        n, d = raw.shape[0], self.d
        l_part = raw[:, : self.n_skew]
        m_part = raw[:, self.n_skew : self.n_skew + self.n_sym]
        de = raw[:, self.n_skew + self.n_sym : self.n_skew + self.n_sym + d]
        ds = raw[:, self.n_skew + self.n_sym + d :]

        L0 = np.zeros((n, d, d))
        L0[:, self.iu_strict[0], self.iu_strict[1]] = l_part
        L0 -= np.transpose(L0, (0, 2, 1))

        cache = {"n": n}
        if self.mode == "sym":
            M0 = np.zeros((n, d, d))
            M0[:, self.iu[0], self.iu[1]] = m_part
            lower = np.transpose(np.triu(M0, k=1), (0, 2, 1))
            M0 = M0 + lower
            cache.update(L=L0, M=M0, de=de, ds=ds)
            return L0, M0, de, ds, cache

        A = np.zeros((n, d, d))
        A[:, self.il[0], self.il[1]] = m_part
        M0 = A @ np.transpose(A, (0, 2, 1))
        P, s_hat, s_norm = _null_projector(ds)
        Q, e_hat, e_norm = _null_projector(de)
        L = P @ L0 @ P
        M = Q @ M0 @ Q
        cache.update(
            L0=L0, M0=M0, A=A, de=de, ds=ds, P=P, Q=Q,
            s_hat=s_hat, s_norm=s_norm, e_hat=e_hat, e_norm=e_norm,
            L=L, M=M,
        )
        return L, M, de, ds, cache

    # -- backward ----------------------------------------------------------

    def backward(self, cache, gL, gM, gde, gds):
        """Map gradients on (L, M, DE, DS) back to the raw output vector."""
        n, d = cache["n"], self.d
        draw = np.zeros((n, self.d_out))
        if self.mode == "sym":
            draw[:, : self.n_skew] = (
                gL[:, self.iu_strict[0], self.iu_strict[1]]
                - gL[:, self.iu_strict[1], self.iu_strict[0]]
            )
            gm_sym = gM + np.transpose(gM, (0, 2, 1))
            m_entries = gm_sym[:, self.iu[0], self.iu[1]]
            diag_cols = np.flatnonzero(self.iu[0] == self.iu[1])
            m_entries[:, diag_cols] *= 0.5
            draw[:, self.n_skew : self.n_skew + self.n_sym] = m_entries
            draw[:, self.n_skew + self.n_sym : self.n_skew + self.n_sym + d] = gde
            draw[:, self.n_skew + self.n_sym + d :] = gds
            return draw

        L0, M0, A = cache["L0"], cache["M0"], cache["A"]
        P, Q = cache["P"], cache["Q"]
        s_hat, s_norm = cache["s_hat"], cache["s_norm"]
        e_hat, e_norm = cache["e_hat"], cache["e_norm"]

        gL0 = P @ gL @ P
        draw[:, : self.n_skew] = (
            gL0[:, self.iu_strict[0], self.iu_strict[1]]
            - gL0[:, self.iu_strict[1], self.iu_strict[0]]
        )
        gM0 = Q @ gM @ Q
        gA = (gM0 + np.transpose(gM0, (0, 2, 1))) @ A
        draw[:, self.n_skew : self.n_skew + self.n_sym] = gA[:, self.il[0], self.il[1]]

        gds_total = gds + _projector_gradient(gL, L0, P, s_hat, s_norm)
        gde_total = gde + _projector_gradient(gM, M0, Q, e_hat, e_norm)
        draw[:, self.n_skew + self.n_sym : self.n_skew + self.n_sym + d] = gde_total
        draw[:, self.n_skew + self.n_sym + d :] = gds_total
        return draw

    # -- single-state conveniences -----------------------------------------

    def unpack(self, raw_vector):
        raw = as_vector(raw_vector, size=self.d_out, name="raw operator output")
        L, M, de, ds, _ = self.forward(raw[None, :])
        return GenericOperators(L=L[0], M=M[0], de=de[0], ds=ds[0])

    def pack(self, ops):
        """Inverse of ``unpack`` for the free symmetric parametrization."""
        if self.mode != "sym":
            raise ConfigurationError("pack is only defined for the sym parametrization")
        raw = np.empty(self.d_out)
        raw[: self.n_skew] = ops.L[self.iu_strict]
        raw[self.n_skew : self.n_skew + self.n_sym] = ops.M[self.iu]
        raw[self.n_skew + self.n_sym : self.n_skew + self.n_sym + self.d] = ops.de
        raw[self.n_skew + self.n_sym + self.d :] = ops.ds
        return raw


def _null_projector(vectors, tiny=1e-12):
    """Batched P = I - v v^T / |v|^2, with identity fallback for tiny v."""
    n, d = vectors.shape
    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms > tiny, norms, 1.0)
    hats = np.where((norms > tiny)[:, None], vectors / safe[:, None], 0.0)
    eye = np.broadcast_to(np.eye(d), (n, d, d))
    return eye - hats[:, :, None] * hats[:, None, :], hats, np.where(norms > tiny, norms, np.inf)


def _projector_gradient(gB, B0, P, v_hat, v_norm):
    """Gradient w.r.t. the vector defining P of loss terms seen through P B0 P.

    With Bp = P B0 P and upstream gradient gB on Bp, the chain rule through
    both occurrences of P gives, per sample,

        d/dv_hat = -(gB X^T + X gB^T + Y^T gB + gB^T Y) v_hat

    with X = B0 P and Y = P B0; the unit-vector normalization contributes
    the final P / |v| factor.
    """
    X = B0 @ P
    Y = P @ B0
    vh = v_hat[:, :, None]
    contrib = -(
        gB @ np.transpose(X, (0, 2, 1)) @ vh
        + X @ np.transpose(gB, (0, 2, 1)) @ vh
        + np.transpose(Y, (0, 2, 1)) @ gB @ vh
        + np.transpose(gB, (0, 2, 1)) @ Y @ vh
    )[:, :, 0]
    dv = (P @ contrib[:, :, None])[:, :, 0] / v_norm[:, None]
    return dv


def unpack_operators(raw, d, m_parametrization="sym"):
    """One raw output vector -> GenericOperators (skew L, symmetric M)."""
    return _OperatorCodec(d, m_parametrization).unpack(raw)


def pack_operators(ops):
    """GenericOperators -> raw output vector (sym parametrization)."""
    return _OperatorCodec(ops.dim, "sym").pack(ops)


def generic_step(x, ops, dt):
    """One explicit Euler step x + dt (L DE + M DS)."""
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=np.float64)
    out = x + dt * (ops.L @ ops.de + ops.M @ ops.ds)
    if not np.isfinite(out).all():
        raise IntegrationError("non-finite state after step", step=0)
    return out


def degeneracy_residual(ops):
    """|L DS|^2 + |M DE|^2 for one operator quadruple."""
    a = ops.L @ ops.ds
    b = ops.M @ ops.de
    return float(a @ a + b @ b)


def degeneracy_loss(ops_batch):
    """Mean of the squared orthogonality defects over a batch of operators."""
    if isinstance(ops_batch, GenericOperators):
        ops_batch = [ops_batch]
    return float(np.mean([degeneracy_residual(ops) for ops in ops_batch]))


@dataclass
class RolloutResult:
    """Latent trajectory plus per-step consistency diagnostics."""

    states: np.ndarray
    energy_rate: np.ndarray
    entropy_rate: np.ndarray
    degeneracy_residual: np.ndarray
    m_min_eigenvalue: np.ndarray
    dt: float
    steady_step: int | None = None

    def __len__(self):
        return self.states.shape[0]

    def write_csv(self, path):
        with open(path, "w") as fh:
            d = self.states.shape[1]
            cols = ",".join(f"x{i}" for i in range(d))
            fh.write(f"step,t,{cols},energy_rate,entropy_rate,deg_residual,m_min_eig\n")
            for i, state in enumerate(self.states):
                xs = ",".join(repr(v) for v in state)
                if i == 0:
                    fh.write(f"0,0.0,{xs},,,,\n")
                else:
                    j = i - 1
                    fh.write(
                        f"{i},{i * self.dt!r},{xs},{self.energy_rate[j]!r},"
                        f"{self.entropy_rate[j]!r},{self.degeneracy_residual[j]!r},"
                        f"{self.m_min_eigenvalue[j]!r}\n"
                    )


def rollout(
    operator_fn,
    x0,
    n_steps,
    dt,
    correction_steps=0,
    blowup_norm=None,
    steady_tol=1e-6,
    steady_run=50,
):
    """Iterate the Euler step, re-evaluating operators at each state.

    ``operator_fn(x) -> GenericOperators``. Operators are evaluated at the
    current state (explicit update); ``correction_steps`` optionally
    refines by re-evaluating them at the predicted state. Per step the
    energy and entropy rates DE . dx/dt and DS . dx/dt are recorded along
    with the orthogonality defect and the smallest eigenvalue of M.

    Raises IntegrationError (with the partial result attached) when the
    state norm exceeds ``blowup_norm``.
    """
    x = as_vector(x0, name="initial state").copy()
    d = len(x)
    states = np.empty((n_steps + 1, d))
    states[0] = x
    e_rate = np.empty(n_steps)
    s_rate = np.empty(n_steps)
    deg = np.empty(n_steps)
    m_eig = np.empty(n_steps)
    quiet = 0
    steady = None
    for step in range(n_steps):
        ops = operator_fn(x)
        for _ in range(correction_steps):
            x_pred = x + dt * (ops.L @ ops.de + ops.M @ ops.ds)
            ops = operator_fn(x_pred)
        xdot = ops.L @ ops.de + ops.M @ ops.ds
        x_next = x + dt * xdot
        if not np.isfinite(x_next).all():
            raise IntegrationError(
                f"non-finite state at step {step}", step=step,
                partial=_partial_rollout(states, e_rate, s_rate, deg, m_eig, step, dt),
            )
        e_rate[step] = ops.de @ xdot
        s_rate[step] = ops.ds @ xdot
        deg[step] = degeneracy_residual(ops)
        m_eig[step] = np.min(np.linalg.eigvalsh(0.5 * (ops.M + ops.M.T)))
        states[step + 1] = x_next
        if blowup_norm is not None and np.linalg.norm(x_next) > blowup_norm:
            raise IntegrationError(
                f"state norm {np.linalg.norm(x_next):.3e} exceeded blow-up "
                f"guard {blowup_norm:.3e} at step {step}",
                step=step,
                partial=_partial_rollout(
                    states, e_rate, s_rate, deg, m_eig, step + 1, dt
                ),
            )
        if np.linalg.norm(x_next - x) < steady_tol:
            quiet += 1
            if quiet >= steady_run and steady is None:
                steady = step
        else:
            quiet = 0
        x = x_next
    return RolloutResult(
        states=states,
        energy_rate=e_rate,
        entropy_rate=s_rate,
        degeneracy_residual=deg,
        m_min_eigenvalue=m_eig,
        dt=dt,
        steady_step=steady,
    )


def _partial_rollout(states, e_rate, s_rate, deg, m_eig, upto, dt):
    return RolloutResult(
        states=states[: upto + 1].copy(),
        energy_rate=e_rate[:upto].copy(),
        entropy_rate=s_rate[:upto].copy(),
        degeneracy_residual=deg[:upto].copy(),
        m_min_eigenvalue=m_eig[:upto].copy(),
        dt=dt,
    )


class LatentIntegrator(BaseEstimator):
    """Network producing metriplectic operators, trained on state pairs.

    ``fit(X, y)`` consumes consecutive latent states x_n (X) and x_{n+1}
    (y) separated by ``dt``. The loss is

        mse_weight * mean |x_n + dt (L DE + M DS) - x_{n+1}|^2
        + degeneracy_weight * mean (|L DS|^2 + |M DE|^2)

    with operators evaluated at x_n.
    """

    def __init__(
        self,
        hidden_layers=13,
        hidden_width=195,
        dt=0.015,
        mse_weight=1e3,
        degeneracy_weight=1.0,
        m_parametrization="sym",
        learning_rate=1e-3,
        weight_decay=1e-5,
        epochs=5000,
        batch_size=64,
        lr_milestones=((1500, 0.1), (2400, 0.1), (4000, 0.1)),
        correction_steps=0,
        blowup_factor=1e3,
        seed=0,
    ):
        self.hidden_layers = hidden_layers
        self.hidden_width = hidden_width
        self.dt = dt
        self.mse_weight = mse_weight
        self.degeneracy_weight = degeneracy_weight
        self.m_parametrization = m_parametrization
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr_milestones = lr_milestones
        self.correction_steps = correction_steps
        self.blowup_factor = blowup_factor
        self.seed = seed

    def _build(self, d):
        self.codec_ = _OperatorCodec(d, self.m_parametrization)
        rng = np.random.default_rng(self.seed)
        dims = (d, *([self.hidden_width] * self.hidden_layers), self.codec_.d_out)
        self.net_ = mlp(dims, rng)
        self.d_ = d

    def _batch_loss_and_grads(self, x, y):
        n = x.shape[0]
        raw = self.net_.forward(x, remember=True)
        L, M, de, ds, cache = self.codec_.forward(raw)
        xdot = (L @ de[:, :, None])[:, :, 0] + (M @ ds[:, :, None])[:, :, 0]
        pred = x + self.dt * xdot
        diff = pred - y
        mse = float(np.sum(diff * diff) / n)

        a = (L @ ds[:, :, None])[:, :, 0]
        b = (M @ de[:, :, None])[:, :, 0]
        deg = float((np.sum(a * a) + np.sum(b * b)) / n)
        total = self.mse_weight * mse + self.degeneracy_weight * deg

        gdot = (2.0 * self.mse_weight * self.dt / n) * diff
        gL = gdot[:, :, None] * de[:, None, :]
        gM = gdot[:, :, None] * ds[:, None, :]
        gde = (np.transpose(L, (0, 2, 1)) @ gdot[:, :, None])[:, :, 0]
        gds = (np.transpose(M, (0, 2, 1)) @ gdot[:, :, None])[:, :, 0]
        if self.degeneracy_weight:
            ga = (2.0 * self.degeneracy_weight / n) * a
            gb = (2.0 * self.degeneracy_weight / n) * b
            gL += ga[:, :, None] * ds[:, None, :]
            gds += (np.transpose(L, (0, 2, 1)) @ ga[:, :, None])[:, :, 0]
            gM += gb[:, :, None] * de[:, None, :]
            gde += (np.transpose(M, (0, 2, 1)) @ gb[:, :, None])[:, :, 0]
        draw = self.codec_.backward(cache, gL, gM, gde, gds)
        grads, _ = self.net_.backward(draw)
        return total, mse, deg, grads

    def fit(self, X, y):
        X = as_matrix(X, name="states")
        y = as_matrix(y, rows=X.shape[0], cols=X.shape[1], name="next states")
        self._build(X.shape[1])
        self.training_norm_ = float(np.max(np.linalg.norm(X, axis=1)))
        params = self.net_.parameters()
        opt = Adam(params, lr=self.learning_rate, weight_decay=self.weight_decay)
        schedule = LrSchedule(self.lr_milestones)
        rng = np.random.default_rng(self.seed + 1)
        n = X.shape[0]
        batch = self.batch_size or n
        history = []
        initial_total = None
        for epoch in range(self.epochs):
            schedule.apply(opt, epoch)
            order = rng.permutation(n) if batch < n else np.arange(n)
            tot_acc = mse_acc = deg_acc = 0.0
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                total, mse, deg, grads = self._batch_loss_and_grads(X[idx], y[idx])
                opt.step(params, grads, context=f"integrator epoch {epoch}")
                tot_acc += total * len(idx)
                mse_acc += mse * len(idx)
                deg_acc += deg * len(idx)
            history.append((epoch, mse_acc / n, deg_acc / n, tot_acc / n))
            if initial_total is None:
                initial_total = tot_acc / n
            elif tot_acc / n > 1e3 * max(initial_total, 1e-12):
                raise TrainingError(
                    f"integrator diverged at epoch {epoch}: "
                    f"{tot_acc / n:.3e} vs initial {initial_total:.3e}"
                )
        self.history_ = np.array(history)
        return self

    def loss(self, X, y):
        """(total, mse, deg) on a batch of pairs, without updating weights."""
        X = as_matrix(X, name="states")
        y = as_matrix(y, rows=X.shape[0], cols=X.shape[1], name="next states")
        self._check_fitted()
        total, mse, deg, _ = self._batch_loss_and_grads(X, y)
        return total, mse, deg

    def operators(self, x):
        """GenericOperators evaluated at one latent state."""
        self._check_fitted()
        raw = self.net_.forward(as_vector(x, size=self.d_, name="state"))
        return self.codec_.unpack(raw)

    def step(self, x):
        ops = self.operators(x)
        if self.correction_steps:
            for _ in range(self.correction_steps):
                pred = generic_step(x, ops, self.dt)
                ops = self.operators(pred)
        return generic_step(x, ops, self.dt)

    def predict(self, x0, n_steps):
        """Roll the learned dynamics forward; returns a RolloutResult."""
        self._check_fitted()
        guard = self.blowup_factor * max(self.training_norm_, 1.0)
        return rollout(
            self.operators,
            x0,
            n_steps,
            self.dt,
            correction_steps=self.correction_steps,
            blowup_norm=guard,
        )

    def get_weights(self):
        self._check_fitted()
        return [p.copy() for p in self.net_.parameters()]

    def set_weights(self, arrays, d, training_norm=1.0):
        self._build(d)
        params = self.net_.parameters()
        if len(arrays) != len(params):
            raise ConfigurationError("weight block does not match architecture")
        for p, a in zip(params, arrays):
            if p.shape != a.shape:
                raise ConfigurationError(
                    f"weight shape mismatch: expected {p.shape}, got {a.shape}"
                )
            p[...] = a
        self.training_norm_ = float(training_norm)
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise ConfigurationError("integrator used before fit")


def spnn_loss(pairs, model):
    """(total, mse, deg) of consecutive-state pairs under a trained model."""
    x, y = pairs
    return model.loss(x, y)
