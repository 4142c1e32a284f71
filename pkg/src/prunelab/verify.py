"""Closed-form-vs-simulation verification suite.

Each check compares a measured quantity with its closed-form prediction at an
explicit tolerance and reports a dict with status ``pass``/``fail``/``skip``,
the measured and expected values, and the tolerance.  ``verify_theorems``
bundles them into one report; the acceptance tests call the same functions
one by one.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import analytics, dpp, harness, pruning, theory
from .netcore import InputSample, TwoLayerNet, activation, forward, make_student, make_teacher
from .trainer import TrainConfig, sgd_step, train

#: per-check tolerances, fixed up front
BASELINE_NOISELESS_MAX = 0.06
BASELINE_NOISY_WINDOW = (0.15, 0.35)
BASELINE_MAX_SECONDS = 300.0
DPP_EXACTNESS_REL = 0.05
WINNING_TICKET_FACTOR = 0.05
RAND_EDGE_REL = 0.10
KERNEL_FROBENIUS_REL = 0.05
SECOND_LAYER_REL = 0.05
SECOND_LAYER_SEEDS = 10
EDGE_OP_SIGMAS = 3.0
EDGE_OP_MASKS = 10_000
SAMPLER_TV_MAX = 0.02
SAMPLER_DRAWS = 100_000
GRADIENT_REL = 1e-6
CLOSED_VS_MC_SIGMAS = 3.0
ROUND_WIN_FRACTION = 0.9
#: polish budget that brings the SGD hover close enough to the fixed point
#: for the per-group sum identity to be measurable
SUMS_POLISH_STEPS = 200_000


def _result(name, status, measured=None, expected=None, tolerance=None, detail=""):
    return {
        "name": name,
        "status": status,
        "measured": measured,
        "expected": expected,
        "tolerance": tolerance,
        "detail": detail,
    }


def _pass_fail(name, ok, **kw):
    return _result(name, "pass" if ok else "fail", **kw)


# --------------------------------------------------------------------------
# analytic checks (no simulation)
# --------------------------------------------------------------------------

def check_random_node_dominance():
    """Exact enumeration: expected random-node error is never below the DPP
    error, and strictly above it whenever k_n >= 2.

    At k_n = 1 both prunings keep a single node, so the two formulas coincide
    exactly; the strict inequality starts at k_n = 2.
    """
    worst_gap = math.inf
    equal_at_one = True
    for M in range(1, 7):
        for Z in range(2, 9):
            for k_n in range(1, M + 1):
                p = theory.TheoryParams(M=M, Z=Z, v_star=2.0, k_n=k_n)
                gap = theory.ge_random_node_expected(p) - theory.ge_dpp_node(p)
                if k_n == 1:
                    equal_at_one &= abs(gap) < 1e-12
                else:
                    worst_gap = min(worst_gap, gap)
    ok = equal_at_one and worst_gap > 0.0
    return _pass_fail(
        "random_node_dominance_analytic",
        ok,
        measured={"min_gap_kn_ge_2": worst_gap, "equality_at_kn_1": equal_at_one},
        expected="gap > 0 for k_n >= 2; exact tie at k_n = 1",
        detail="enumerated M in 1..6, Z in 2..8, k_n in 1..M",
    )


def check_difference_grids(z_max=30, c_resolution=100):
    """Sign checks of the two matched-size difference grids over Z in 4..z_max."""
    zs = range(4, z_max + 1)
    g4 = theory.dpp_node_minus_random_edge_grid(zs, c_resolution)
    g5 = theory.reweighted_dpp_minus_rescaled_edge_grid(zs, c_resolution)
    min4 = float(g4.values.min())
    max5 = float(g5.values.max())
    results = [
        _pass_fail(
            "dpp_minus_random_edge_grid_nonnegative",
            min4 >= 0.0,
            measured=min4,
            expected=">= 0 entrywise",
        ),
        _pass_fail(
            "reweighted_dpp_minus_rescaled_edge_grid_nonpositive",
            max5 <= 0.0,
            measured=max5,
            expected="<= 0 entrywise",
        ),
    ]
    return results


def check_grid_domain_guard(cfg):
    """The difference grids refuse Z below the proved range."""
    if cfg.Z >= 4:
        return _result(
            "grid_at_config_Z",
            "pass",
            detail=f"config Z={cfg.Z} lies inside the grid hypothesis (Z >= 4)",
        )
    try:
        theory.dpp_node_minus_random_edge_grid([cfg.Z], 10)
    except theory.TheoremDomainError:
        return _result(
            "grid_at_config_Z",
            "skip",
            detail=f"config Z={cfg.Z} outside theorem hypothesis (needs Z >= 4); grid check skipped",
        )
    return _result("grid_at_config_Z", "fail", detail="domain guard did not trigger")


# --------------------------------------------------------------------------
# single-run simulation checks
# --------------------------------------------------------------------------

def measured_unpruned_ge(state):
    return analytics.ge_from_outputs(state.acts_test @ state.student.v, state.y_test)


def check_baseline(state, elapsed=None):
    """Unpruned Monte-Carlo error of a converged default run."""
    ge = measured_unpruned_ge(state).value
    sigma = state.cfg.sigma
    if sigma == 0.0:
        ok = ge <= BASELINE_NOISELESS_MAX
        expected = f"<= {BASELINE_NOISELESS_MAX}"
    else:
        lo, hi = BASELINE_NOISY_WINDOW
        ok = lo <= ge <= hi
        expected = f"in [{lo}, {hi}]"
    if elapsed is not None:
        ok = ok and elapsed <= BASELINE_MAX_SECONDS
    return _pass_fail(
        f"baseline_unpruned_sigma_{sigma}",
        ok,
        measured=ge,
        expected=expected,
        detail=f"train+measure elapsed {elapsed:.1f}s" if elapsed is not None else "",
    )


def _node_mean_ge(state, kept_list, second_layers):
    vals = [
        analytics.ge_from_outputs(state.acts_test[:, kept] @ v, state.y_test).value
        for kept, v in zip(kept_list, second_layers)
    ]
    return float(np.mean(vals))


def _dpp_mask_means(state, k_n, rng, reweighted):
    cfg = state.cfg
    sampler = dpp.KdppSampler(state.kernel, k_n)
    kept_list = [sampler.sample(rng) for _ in range(cfg.masks_per_round)]
    if reweighted:
        seconds = [harness.reweight_from_gram(state, kept) for kept in kept_list]
    else:
        seconds = [state.student.v[kept] for kept in kept_list]
    return _node_mean_ge(state, kept_list, seconds)


def check_dpp_exactness(state):
    """DPP node pruning with the converged overlap kernel versus its closed form.

    Plain pruning must match ge_dpp_node and reweighted pruning
    ge_dpp_node_reweighted, each within DPP_EXACTNESS_REL of the natural scale
    M (v*)^2 / 6; at k_n = M the reweighted network must recover the
    unpruned function up to WINNING_TICKET_FACTOR * (v*)^2.  For noisy
    configs the closed forms do not apply and an ordering-only check runs
    instead (DPP no worse than uniform random selection).
    """
    cfg = state.cfg
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, state.round_index, 11]))
    results = []
    if cfg.sigma > 0:
        for k_n in range(1, cfg.M + 1):
            dpp_ge = _dpp_mask_means(state, k_n, rng, reweighted=False)
            rand_masks = [pruning.prune_random_node(cfg.K, k_n, rng).kept for _ in range(cfg.masks_per_round)]
            rand_ge = _node_mean_ge(state, rand_masks, [state.student.v[k] for k in rand_masks])
            results.append(
                _pass_fail(
                    f"dpp_ordering_noisy_kn_{k_n}",
                    dpp_ge <= rand_ge,
                    measured={"dpp": dpp_ge, "random": rand_ge},
                    expected="dpp <= random (ordering only; exactness assumes sigma = 0)",
                )
            )
        return results
    scale = cfg.M * cfg.v_star**2 / 6.0
    for k_n in range(1, cfg.M + 1):
        p = theory.TheoryParams(M=cfg.M, Z=cfg.Z, v_star=cfg.v_star, k_n=k_n)
        plain = _dpp_mask_means(state, k_n, rng, reweighted=False)
        results.append(
            _pass_fail(
                f"dpp_exactness_kn_{k_n}",
                abs(plain - theory.ge_dpp_node(p)) <= DPP_EXACTNESS_REL * scale,
                measured=plain,
                expected=theory.ge_dpp_node(p),
                tolerance=DPP_EXACTNESS_REL * scale,
            )
        )
        rw = _dpp_mask_means(state, k_n, rng, reweighted=True)
        results.append(
            _pass_fail(
                f"dpp_reweighted_exactness_kn_{k_n}",
                abs(rw - theory.ge_dpp_node_reweighted(p)) <= DPP_EXACTNESS_REL * scale,
                measured=rw,
                expected=theory.ge_dpp_node_reweighted(p),
                tolerance=DPP_EXACTNESS_REL * scale,
            )
        )
        if k_n == cfg.M:
            results.append(
                _pass_fail(
                    "dpp_winning_ticket",
                    rw <= WINNING_TICKET_FACTOR * cfg.v_star**2,
                    measured=rw,
                    expected=f"<= {WINNING_TICKET_FACTOR * cfg.v_star**2}",
                    detail="reweighted DPP pruning at k_n = M recovers the teacher",
                )
            )
    return results


def check_random_edge_formula(state):
    """Bernoulli random edge pruning versus its closed-form error.

    Averages Monte-Carlo error over masks_per_round masks at each keep
    probability c = k_n / K up to 1/2 and compares with ge_random_edge at
    RAND_EDGE_REL relative tolerance (the formula describes the expected
    network; at finite N the measured average sits a few percent below).
    """
    cfg = state.cfg
    if cfg.sigma > 0:
        return [
            _result(
                "random_edge_formula",
                "skip",
                detail="closed form assumes noiseless training; skipped for sigma > 0",
            )
        ]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, state.round_index, 12]))
    results = []
    c_list = [k / cfg.K for k in cfg.k_n_grid if k / cfg.K <= 0.5]
    sqn = math.sqrt(cfg.N)
    for c in c_list:
        expected = theory.ge_random_edge(
            theory.TheoryParams(M=cfg.M, Z=cfg.Z, v_star=cfg.v_star, c=c)
        )
        masks = [
            pruning.prune_random_edge(cfg.K, cfg.N, c, rng, exact=False)
            for _ in range(cfg.masks_per_round)
        ]
        W_all = np.vstack([state.student.w * m.kept for m in masks])
        sums = np.zeros(len(masks))
        for offset, X in harness.edge_test_stream(state):
            acts = activation(X @ W_all.T / sqn).reshape(X.shape[0], len(masks), cfg.K)
            out = acts @ state.student.v
            s = 0.5 * (out - state.y_test[offset : offset + X.shape[0], None]) ** 2
            sums += s.sum(axis=0)
        measured = float(np.mean(sums / cfg.test_samples))
        results.append(
            _pass_fail(
                f"random_edge_formula_c_{c:.4f}",
                abs(measured - expected) <= RAND_EDGE_REL * expected,
                measured=measured,
                expected=expected,
                tolerance=RAND_EDGE_REL * expected,
            )
        )
    return results


def check_kernel_lemma(state):
    """The sample inner-product kernel of the hidden layer converges to Q.

    Accumulates L = (1/(N n)) sum_t h h^T over the round's test stream, with
    h the pre-activation information vector, and compares with the overlap
    matrix Q in Frobenius norm.
    """
    cfg = state.cfg
    Q = state.order_params.Q
    accum = np.zeros((cfg.K, cfg.K))
    for _, X in harness.edge_test_stream(state):
        H = X @ state.student.w.T
        accum += H.T @ H
    L = accum / (cfg.N * cfg.test_samples)
    dist = float(np.linalg.norm(L - Q))
    bound = KERNEL_FROBENIUS_REL * float(np.linalg.norm(Q))
    return _pass_fail(
        "inner_product_kernel_equals_Q",
        dist <= bound,
        measured=dist,
        expected=0.0,
        tolerance=bound,
        detail=f"{cfg.test_samples} inputs",
    )


def check_edge_op_lemma(state, c=0.5, n_masks=EDGE_OP_MASKS):
    """Mask-averaged order parameters of Bernoulli edge pruning match the
    closed form E[Q'_ii] = c Q_ii, E[Q'_ik] = c^2 Q_ik, E[R'] = c R within
    EDGE_OP_SIGMAS standard errors, every entry."""
    cfg = state.cfg
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, state.round_index, 13]))
    w, tw = state.student.w, state.teacher.w
    K = cfg.K
    q_sum = np.zeros((K, K))
    q_sq = np.zeros((K, K))
    r_sum = np.zeros((K, cfg.M))
    r_sq = np.zeros((K, cfg.M))
    for _ in range(n_masks):
        wm = w * (rng.random(w.shape) < c)
        Qp = wm @ wm.T / cfg.N
        Rp = wm @ tw.T / cfg.N
        q_sum += Qp
        q_sq += Qp * Qp
        r_sum += Rp
        r_sq += Rp * Rp
    exp = theory.expected_edge_order_params(state.order_params, c)
    ok = True
    worst = 0.0
    for total, sq, ref in ((q_sum, q_sq, exp.Q), (r_sum, r_sq, exp.R)):
        mean = total / n_masks
        var = np.clip(sq / n_masks - mean * mean, 0.0, None) * n_masks / (n_masks - 1)
        se = np.sqrt(var / n_masks)
        z = np.abs(mean - ref) / np.where(se > 0, se, np.inf)
        worst = max(worst, float(z.max()))
        ok &= bool(np.all(z <= EDGE_OP_SIGMAS))
    return _pass_fail(
        "edge_pruned_order_params_lemma",
        ok,
        measured={"worst_z": worst},
        expected=f"all entries within {EDGE_OP_SIGMAS} standard errors",
        detail=f"{n_masks} Bernoulli masks at c={c}",
    )


def check_closed_vs_mc(state):
    """Closed-form and Monte-Carlo unpruned error agree within 3 standard errors."""
    est = measured_unpruned_ge(state)
    closed = analytics.ge_closed_form(state.order_params, state.student.v, state.teacher.v)
    ok = abs(closed - est.value) <= CLOSED_VS_MC_SIGMAS * est.std_err
    return _pass_fail(
        "closed_form_vs_monte_carlo",
        ok,
        measured=est.value,
        expected=closed,
        tolerance=CLOSED_VS_MC_SIGMAS * est.std_err,
    )


def check_second_layer_sums(cfg, n_seeds=SECOND_LAYER_SEEDS):
    """Per-group second-layer sums approach v* at the converged fixed point.

    Runs ``n_seeds`` noiseless trainings with the annealing polish (constant
    learning rate keeps an SGD hover whose systematic norm inflation biases
    the sums several percent low) and requires every group sum within
    SECOND_LAYER_REL of v* on every seed.
    """
    def one(seed):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1000 + seed]))
        teacher = make_teacher(cfg.N, cfg.M, cfg.v_star, rng)
        student0 = make_student(cfg.N, cfg.K, rng)
        tcfg = TrainConfig(
            eta=cfg.eta,
            steps=cfg.train_steps,
            sigma=0.0,
            seed=[cfg.seed, 1000 + seed, 1],
            polish_steps=SUMS_POLISH_STEPS,
        )
        student = train(teacher, student0, tcfg).final_student
        groups = analytics.assign_groups(analytics.order_params(student, teacher))
        return [
            abs(float(np.sum(student.v[groups.group == m])) - cfg.v_star) / abs(cfg.v_star)
            for m in range(cfg.M)
        ]

    with ThreadPoolExecutor(max_workers=harness.worker_count(n_seeds)) as pool:
        devs = [d for row in pool.map(one, range(n_seeds)) for d in row]
    worst = max(devs)
    ok = worst <= SECOND_LAYER_REL
    return _pass_fail(
        "second_layer_group_sums",
        ok,
        measured={"worst_relative_deviation": worst},
        expected=f"every group sum within {SECOND_LAYER_REL:.0%} of v*",
        detail=f"{n_seeds} seeds, polish {SUMS_POLISH_STEPS} steps per stage",
    )


# --------------------------------------------------------------------------
# sampler and property checks
# --------------------------------------------------------------------------

def sampler_test_kernels():
    """Five fixed kernels with ground sets of size 4..8 for distribution tests."""
    rng = np.random.default_rng(1234)
    kernels = [(dpp.DppKernel(L=np.eye(4)), 2)]
    blocks = np.zeros((6, 6))
    blocks[:3, :3] = 1.0
    blocks[3:, 3:] = 1.0
    kernels.append((dpp.DppKernel(L=blocks + 1e-6 * np.eye(6), eps=1e-6), 2))
    idx = np.arange(5.0)
    kernels.append((dpp.DppKernel(L=np.exp(-0.3 * (idx[:, None] - idx[None, :]) ** 2), beta=0.3), 2))
    A = rng.standard_normal((7, 7))
    kernels.append((dpp.DppKernel(L=A @ A.T / 7 + 1e-3 * np.eye(7)), 3))
    B = rng.standard_normal((8, 10))
    kernels.append((dpp.DppKernel(L=B @ B.T / 10 + 1e-3 * np.eye(8)), 4))
    return kernels


def check_sampler_tv(n_draws=SAMPLER_DRAWS):
    """Empirical k-DPP sampler distribution versus the enumeration oracle.

    Total-variation distance at ``n_draws`` samples must stay below
    SAMPLER_TV_MAX for every fixed test kernel.
    """
    results = []
    for idx, (kernel, k) in enumerate(sampler_test_kernels()):
        rng = np.random.default_rng(500 + idx)
        subsets, probs = dpp.kdpp_distribution(kernel, k)
        lookup = {s: i for i, s in enumerate(subsets)}
        counts = np.zeros(len(subsets))
        sampler = dpp.KdppSampler(kernel, k)
        for _ in range(n_draws):
            counts[lookup[tuple(sampler.sample(rng))]] += 1
        tv = 0.5 * float(np.abs(counts / n_draws - probs).sum())
        results.append(
            _pass_fail(
                f"kdpp_sampler_tv_kernel_{idx}",
                tv <= SAMPLER_TV_MAX,
                measured=tv,
                expected=f"<= {SAMPLER_TV_MAX}",
                detail=f"ground set {kernel.size}, k={k}, {n_draws} draws",
            )
        )
    return results


def check_gradient_finite_differences(n_dim=10, hidden=3, step=1e-5):
    """The one-step update direction matches central finite differences of the loss.

    The update applies rate eta to the loss gradient in w and eta/N in v, so
    the implied gradients are (w - w') / eta and (v - v') N / eta.
    """
    rng = np.random.default_rng(77)
    net = TwoLayerNet(rng.standard_normal((hidden, n_dim)), rng.standard_normal(hidden))
    x = rng.standard_normal(n_dim)
    y = 0.3
    eta = 0.5

    def loss(w, v):
        return 0.5 * (forward(TwoLayerNet(w, v), x) - y) ** 2

    stepped = sgd_step(net, InputSample(x=x, y=y), eta)
    grad_w = (net.w - stepped.w) / eta
    grad_v = (net.v - stepped.v) * n_dim / eta
    worst = 0.0
    for idx in np.ndindex(net.w.shape):
        b = np.zeros_like(net.w)
        b[idx] = step
        fd = (loss(net.w + b, net.v) - loss(net.w - b, net.v)) / (2 * step)
        worst = max(worst, abs(fd - grad_w[idx]) / max(abs(fd), 1e-12))
    for i in range(hidden):
        b = np.zeros_like(net.v)
        b[i] = step
        fd = (loss(net.w, net.v + b) - loss(net.w, net.v - b)) / (2 * step)
        worst = max(worst, abs(fd - grad_v[i]) / max(abs(fd), 1e-12))
    return _pass_fail(
        "sgd_gradient_finite_differences",
        worst <= GRADIENT_REL,
        measured={"worst_relative_error": worst},
        expected=f"<= {GRADIENT_REL}",
    )


def check_determinism():
    """Identical seeds reproduce training traces and experiment records bitwise."""
    small = harness.ExperimentConfig(
        N=60,
        M=2,
        K=4,
        v_star=2.0,
        train_steps=4_000,
        test_samples=2_000,
        rounds=1,
        masks_per_round=10,
        k_n_grid=(1, 2),
        seed=3,
    )
    rec1 = harness.run_round(small, 0)
    rec2 = harness.run_round(small, 0)
    same_records = all(a == b for a, b in zip(rec1, rec2)) and len(rec1) == len(rec2)
    rng = np.random.default_rng(5)
    teacher = make_teacher(40, 2, 2.0, rng)
    student0 = make_student(40, 4, rng)
    tcfg = TrainConfig(eta=0.5, steps=2_000, seed=9, ge_log_interval=500)
    t1 = train(teacher, student0, tcfg)
    t2 = train(teacher, student0, tcfg)
    same_train = (
        np.array_equal(t1.final_student.w, t2.final_student.w)
        and np.array_equal(t1.final_student.v, t2.final_student.v)
        and t1.ge_log == t2.ge_log
    )
    return _pass_fail(
        "determinism_fixed_seeds",
        same_records and same_train,
        measured={"records_identical": same_records, "training_identical": same_train},
        expected="bit-identical reruns",
    )


# --------------------------------------------------------------------------
# experiment-level checks
# --------------------------------------------------------------------------

def _round_node_means(state, cfg):
    """Per-(k_n, method) mean GE for the node methods, plain and reweighted."""
    k_grid = tuple(range(1, cfg.M + 1))
    base = replace(cfg, methods=harness.NODE_METHODS, k_n_grid=k_grid)
    plain = harness.evaluate_round(state, replace(base, reweight=False))
    rw = harness.evaluate_round(state, replace(base, reweight=True))
    table = {}
    for rec in plain + rw:
        k_n = round(rec.pct_params * cfg.K / 100.0)
        table[(rec.method, k_n, rec.reweighted)] = rec.ge_mean
    return table


def check_node_dominance_empirical(states, cfg):
    """Per-round node-method comparisons behind the DPP dominance theorem.

    In each round: expected random-node error must exceed DPP (plain and
    reweighted) for k_n >= 2 -- at k_n = 1 the two coincide exactly, so no
    comparison is made there -- and unreweighted importance pruning must
    exceed reweighted DPP at every k_n <= M.  Each comparison must hold in at
    least ROUND_WIN_FRACTION of the rounds.
    """
    comparisons = {}
    for k_n in range(2, cfg.M + 1):
        comparisons[("random_vs_dpp", k_n, False)] = []
        comparisons[("random_vs_dpp", k_n, True)] = []
    for k_n in range(1, cfg.M + 1):
        comparisons[("importance_vs_reweighted_dpp", k_n, None)] = []
    for state in states:
        means = _round_node_means(state, cfg)
        for k_n in range(2, cfg.M + 1):
            for rw in (False, True):
                comparisons[("random_vs_dpp", k_n, rw)].append(
                    means[("random_node", k_n, rw)] > means[("dpp_node", k_n, rw)]
                )
        for k_n in range(1, cfg.M + 1):
            comparisons[("importance_vs_reweighted_dpp", k_n, None)].append(
                means[("importance_node", k_n, False)] > means[("dpp_node", k_n, True)]
            )
    results = []
    need = math.ceil(ROUND_WIN_FRACTION * len(states))
    for (label, k_n, rw), wins in comparisons.items():
        tag = "" if rw is None else ("_reweighted" if rw else "_plain")
        results.append(
            _pass_fail(
                f"node_dominance_{label}_kn_{k_n}{tag}",
                sum(wins) >= need,
                measured=f"{sum(wins)}/{len(wins)} rounds",
                expected=f">= {need}/{len(wins)} rounds",
            )
        )
    return results


def check_edge_vs_node_conjecture(per_round_records, cfg):
    """Matched-size edge pruning beats node pruning of the same flavor.

    Random edge vs random node is checked for c <= 1/Z (the regime the
    matched-size comparison is established in; beyond it the closed forms
    order the other way), importance edge vs importance node on the whole
    grid.  Each comparison must hold in ROUND_WIN_FRACTION of rounds.
    """
    wins = {}
    for records in per_round_records:
        cells = {}
        for rec in records:
            if rec.reweighted:
                continue
            k_n = round(rec.pct_params * cfg.K / 100.0)
            cells[(rec.method, k_n)] = rec.ge_mean
        for k_n in cfg.k_n_grid:
            if k_n / cfg.K <= 1.0 / cfg.Z and ("random_edge", k_n) in cells:
                wins.setdefault(("random", k_n), []).append(
                    cells[("random_edge", k_n)] <= cells[("random_node", k_n)]
                )
            if ("importance_edge", k_n) in cells:
                wins.setdefault(("importance", k_n), []).append(
                    cells[("importance_edge", k_n)] <= cells[("importance_node", k_n)]
                )
    results = []
    for (flavor, k_n), w in sorted(wins.items()):
        need = math.ceil(ROUND_WIN_FRACTION * len(w))
        results.append(
            _pass_fail(
                f"edge_beats_node_{flavor}_kn_{k_n}",
                sum(w) >= need,
                measured=f"{sum(w)}/{len(w)} rounds",
                expected=f">= {need}/{len(w)} rounds",
            )
        )
    return results


# --------------------------------------------------------------------------
# report assembly
# --------------------------------------------------------------------------

def verify_theorems(cfg=None, rounds=None):
    """Run the full analytic + simulation check suite and return a report.

    The report lists every check with measured values, expectations, and
    tolerances; ``all_pass`` ignores skipped checks.  Heavier, round-based
    checks use ``rounds`` rounds (default: cfg.rounds).
    """
    cfg = cfg or harness.ExperimentConfig()
    rounds = cfg.rounds if rounds is None else rounds
    checks = []
    checks.append(check_random_node_dominance())
    checks.extend(check_difference_grids())
    checks.append(check_grid_domain_guard(cfg))
    checks.append(check_gradient_finite_differences())
    checks.append(check_determinism())
    checks.extend(check_sampler_tv())

    t0 = time.perf_counter()
    state = harness.prepare_round(cfg, 0)
    elapsed = time.perf_counter() - t0
    checks.append(check_baseline(state, elapsed=elapsed))
    checks.append(check_closed_vs_mc(state))
    checks.extend(check_dpp_exactness(state))
    checks.extend(check_random_edge_formula(state))
    checks.append(check_kernel_lemma(state))
    checks.append(check_edge_op_lemma(state))

    other_sigma = 0.25 if cfg.sigma == 0.0 else 0.0
    t0 = time.perf_counter()
    state_other = harness.prepare_round(replace(cfg, sigma=other_sigma), 0)
    checks.append(check_baseline(state_other, elapsed=time.perf_counter() - t0))

    checks.append(check_second_layer_sums(cfg))

    states = [state] + harness.prepare_rounds(cfg, range(1, rounds))
    checks.extend(check_node_dominance_empirical(states, cfg))
    eval_cfg = replace(cfg, edge_mode="exact", reweight=False)
    per_round = harness.evaluate_rounds(states, eval_cfg)
    checks.extend(check_edge_vs_node_conjecture(per_round, cfg))

    report = {
        "config": cfg.to_json(),
        "checks": checks,
        "all_pass": all(c["status"] != "fail" for c in checks),
    }
    return report


def format_report(report):
    lines = []
    for c in report["checks"]:
        status = c["status"].upper()
        extra = ""
        if c["measured"] is not None:
            extra += f"  measured={c['measured']}"
        if c["expected"] is not None:
            extra += f"  expected={c['expected']}"
        if c["tolerance"] is not None:
            extra += f"  tol={c['tolerance']}"
        lines.append(f"[{status:4}] {c['name']}{extra}")
        if c["detail"]:
            lines.append(f"       {c['detail']}")
    lines.append("ALL PASS" if report["all_pass"] else "FAILURES PRESENT")
    return "\n".join(lines)
