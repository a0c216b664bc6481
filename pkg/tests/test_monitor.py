import math

import numpy as np
import pytest

from lugsail import psrf as psrf_module
from lugsail.chains import ChainSet
from lugsail.ess import delta_threshold
from lugsail.mcvar import VarianceEstimate
from lugsail.monitor import MonitorPlan, Schedule, diagnose_static, run_monitor
from lugsail.samplers import AR1, Bimodal, SamplerSpec, StudentT, ar1_crossing_n, ar1_generate, open_sampler


def test_schedule_parse_and_steps():
    s = Schedule.parse("fixed:500")
    assert (s.first(), s.next(500)) == (500, 1000)
    g = Schedule.parse("geometric:1.1")
    assert g.first() == 50 and g.next(50) == 55 and g.next(5) == 6
    assert Schedule.parse("geometric:1.5:20").first() == 20
    for bad in ("geometric:1.0", "fixed:0", "spiral:2"):
        with pytest.raises(ValueError):
            Schedule.parse(bad)


def test_plan_invariants():
    with pytest.raises(ValueError):
        MonitorPlan(1.01, min_effort=0)
    with pytest.raises(ValueError):
        MonitorPlan(1.01, min_effort=100, max_iterations=50)
    with pytest.raises(ValueError):
        MonitorPlan(1.01, statistic="split")
    th = delta_threshold(0.05, 0.1, 1, 3)
    plan = MonitorPlan.from_threshold(th)
    assert plan.min_effort == 1537 and plan.delta == th.delta


def test_iid_stops_at_first_checkpoint_past_min_effort():
    th = delta_threshold(0.05, 0.10, 1, 1)
    plan = MonitorPlan.from_threshold(th)
    first = plan.schedule.first()
    while first < plan.min_effort:
        first = plan.schedule.next(first)
    stops = [run_monitor(SamplerSpec(AR1(0.0), m=1, seed=s), plan).termination_n for s in range(20)]
    assert np.mean(np.array(stops) == first) >= 0.9


def test_trace_invariants():
    spec = SamplerSpec(StudentT(5), m=3, seed=4, proposal_var=2.6**2)
    th = delta_threshold(0.05, 0.10, 1, 3)
    plan = MonitorPlan.from_threshold(th, schedule=Schedule("fixed", 50))
    tr = run_monitor(spec, plan, ("classic",))
    ns = [e.n for e in tr.entries]
    assert all(b > a for a, b in zip(ns, ns[1:]))
    for e in tr.entries:
        if e.converged:
            assert e.psrf <= th.delta and e.n >= plan.min_effort
    assert tr.reason == "threshold_met" and tr.final.converged
    assert sum(e.converged for e in tr.entries) == 1
    # earlier checkpoints saw exact prefixes of the final chains
    g = open_sampler(spec)
    g.grow_to(ns[3])
    assert g.chains() == tr.chains.prefix(ns[3])


def test_replay_reproduces_final_entry():
    spec = SamplerSpec(AR1(0.9), m=4, seed=2)
    plan = MonitorPlan.from_threshold(delta_threshold(0.05, 0.1, 1, 4), schedule=Schedule("fixed", 500))
    tr = run_monitor(spec, plan)
    rep, ess, conv = diagnose_static(tr.chains, plan)
    assert rep.value == tr.final.psrf and ess == tr.final.ess and conv == tr.final.converged


def test_cap_hit():
    spec = SamplerSpec(Bimodal(start_mean=0.0, start_sd=1.0), m=3, seed=0, proposal_var=0.01)
    tr = run_monitor(spec, MonitorPlan(1.0001, min_effort=1, max_iterations=300))
    assert tr.reason == "cap_hit" and tr.termination_n == 300 and not tr.final.converged


def test_degenerate_chains_keep_sampling():
    # a proposal that is never accepted leaves every chain constant
    spec = SamplerSpec(StudentT(5), m=2, seed=0, proposal_var=1e12, starts=[[0.0], [0.0]])
    tr = run_monitor(spec, MonitorPlan(1.1, min_effort=1, max_iterations=120, schedule=Schedule("fixed", 60)))
    assert tr.entries[0].psrf == math.inf and not tr.entries[0].converged


def test_min_effort_gate_in_static_diagnosis(rng):
    cs = ChainSet(rng.standard_normal((4, 500)))
    rep, _, conv = diagnose_static(cs, MonitorPlan(10.0, min_effort=501, max_iterations=501))
    assert rep.value < 10.0 and not conv
    _, _, conv = diagnose_static(cs, MonitorPlan(10.0, min_effort=500, max_iterations=500))
    assert conv


def test_static_diagnosis_with_lugsail_equal_to_s(rng, monkeypatch):
    cs = ChainSet(rng.standard_normal((2, 400, 2)))
    S = psrf_module.summarize(cs).pooled_cov

    def fake(cs_, bc, repair=False):
        from lugsail.mcvar import ResolvedBatch

        return VarianceEstimate("lugsail", np.array(S), cs_.m, cs_.n, batch=ResolvedBatch("sqrt", 20, 20),
                                parts={"b3": 6, "a3": 66})

    monkeypatch.setattr(psrf_module, "replicated_lugsail", fake)
    rep, ess, conv = diagnose_static(cs, MonitorPlan(1.0 + 1e-9, min_effort=1, max_iterations=1))
    assert rep.value == pytest.approx(1.0, abs=1e-15)
    assert ess == pytest.approx(800.0)
    assert conv


def test_burnin_is_dropped_before_evaluation(rng):
    x = rng.standard_normal((3, 300))
    x[:, :100] += 50.0
    plan = MonitorPlan(1.05, min_effort=1, max_iterations=1, burnin=100)
    rep, _, conv = diagnose_static(ChainSet(x), plan)
    assert rep.n == 200 and conv


def test_straddles_truth_at_true_crossing():
    th = delta_threshold(0.05, 0.10, 1, 5)
    nstar = ar1_crossing_n(0.95, 1.0, th.delta)
    plan = MonitorPlan.from_threshold(th)
    conv = [diagnose_static(ar1_generate(SamplerSpec(AR1(0.95), m=5, seed=(13, s)), nstar), plan)[2]
            for s in range(100)]
    frac = np.mean(conv)
    assert 0.25 <= frac <= 0.75, f"converged in {frac:.0%} of seeds at n* = {nstar}"


def test_trace_csv(tmp_path):
    spec = SamplerSpec(AR1(0.5), m=2, seed=1)
    tr = run_monitor(spec, MonitorPlan(1.01, min_effort=1, schedule=Schedule("fixed", 100)), ("classic",))
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,psrf,ess,converged,psrf_classic"
    assert len(lines) == len(tr.entries) + 1
    assert float(lines[-1].split(",")[1]) == tr.final.psrf


def test_first_crossing():
    spec = SamplerSpec(StudentT(5), m=3, seed=6, proposal_var=2.6**2)
    tr = run_monitor(spec, MonitorPlan.from_threshold(delta_threshold(0.05, 0.1, 1, 3), schedule=Schedule("fixed", 50)),
                     ("classic",))
    n = tr.first_crossing(1.1)
    assert n is not None and n <= tr.termination_n
    assert next(e for e in tr.entries if e.n == n).psrf <= 1.1
    assert all(e.psrf > 1.1 for e in tr.entries if e.n < n)
    assert tr.first_crossing(0.5) is None
    assert tr.first_crossing(1.1, column="psrf_classic") is not None
