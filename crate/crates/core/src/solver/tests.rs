use super::*;
use crate::model::{
    FeeSchedule, FillModel, MarketModel, MidQuoteModel, OrderBounds, SpreadModel,
};
use approx::assert_abs_diff_eq;
use proptest::prelude::*;

/// Two-state, five-price toy instance small enough for brute-force checks.
fn tiny_model() -> MarketModel {
    // Tables are [minus, best, plus] per side: aggressiveness raises the
    // bid's odds toward plus and the ask's toward minus.
    let bid = [vec![0.10, 0.06], vec![0.20, 0.12], vec![0.30, 0.20]];
    let ask = [vec![0.28, 0.18], vec![0.18, 0.11], vec![0.09, 0.05]];
    MarketModel {
        fees: FeeSchedule { tick: 0.01, commission_rate: 0.0, stamp_rate: 0.0 },
        midquote: MidQuoteModel { p0: 1.0, drift: 0.0, vol: 0.005 },
        spread: SpreadModel {
            n_states: 2,
            tick: 0.01,
            jump_rate: 0.5,
            transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        },
        fills: FillModel::new(2, bid, ask).unwrap(),
        bounds: OrderBounds { max_limit: 10, max_market: 10, lot: 10, y_min: -10, y_max: 10 },
    }
}

fn tiny_params() -> SchemeParams {
    SchemeParams {
        horizon: 0.6,
        step: 0.3,
        kappa: 1.0,
        quad_nodes: 3,
        p_halfwidth: Some(0.02),
        p_step: None,
        risk_aversion: 0.5,
        gamma: 0.0,
        cash_scale: 1.0,
        memory_budget: 1 << 26,
    }
}

#[test]
fn grid_geometry_matches_request() {
    let model = tiny_model();
    let params = tiny_params();
    let grid = StateGrid::new(&model, &params).unwrap();
    assert_eq!(grid.n_steps, 2);
    assert_eq!(grid.y_levels, vec![-10, 0, 10]);
    assert_eq!(grid.p_ticks, vec![98, 99, 100, 101, 102]);
    assert_eq!(grid.slice_len(), 2 * 3 * 5);
}

#[test]
fn nearest_price_node_ties_toward_center() {
    let model = tiny_model();
    let params = tiny_params();
    let grid = StateGrid::new(&model, &params).unwrap();
    assert_eq!(grid.nearest_p_index(1.0), 2);
    assert_eq!(grid.nearest_p_index(1.004), 2);
    assert_eq!(grid.nearest_p_index(1.006), 3);
    // Exact midpoints resolve toward the center node.
    assert_eq!(grid.nearest_p_index(1.015), 3);
    assert_eq!(grid.nearest_p_index(0.985), 1);
    // Clamped at the edges.
    assert_eq!(grid.nearest_p_index(0.5), 0);
    assert_eq!(grid.nearest_p_index(2.0), 4);
}

#[test]
fn gamma_must_be_zero() {
    let mut params = tiny_params();
    params.gamma = 0.1;
    match Solver::new(&tiny_model(), &params) {
        Err(crate::error::Error::Domain(msg)) => assert!(msg.contains("gamma")),
        Ok(_) => panic!("expected a domain error for nonzero gamma"),
        Err(other) => panic!("expected a domain error, got {other:?}"),
    }
}

#[test]
fn memory_budget_is_enforced() {
    let mut params = tiny_params();
    params.memory_budget = 64;
    match Solver::new(&tiny_model(), &params) {
        Err(crate::error::Error::Resource(msg)) => assert!(msg.contains("bytes")),
        Err(other) => panic!("expected a resource error, got {other:?}"),
        Ok(_) => panic!("expected a resource error"),
    }
}

#[test]
fn terminal_slice_is_scaled_liquidation_cost() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let term = solver.terminal_slice();
    let g = &solver.grid;
    // y = 10 at p = 1.00, spread state 0 (one tick): sell 10 at the bid,
    // c(-10, 1.0, 0.01) = -10 * 1.0 + 10 * 0.005 = -9.95.
    let idx = g.node_index(0, g.y_index(10).unwrap(), 2);
    assert_abs_diff_eq!(term[idx], 0.5 * -9.95, epsilon = 1e-12);
    // Flat inventory costs nothing to unwind.
    let idx0 = g.node_index(1, g.y_index(0).unwrap(), 2);
    assert_abs_diff_eq!(term[idx0], 0.0, epsilon = 1e-12);
}

#[test]
fn zero_vol_price_expectation_is_drifted_lookup() {
    let mut model = tiny_model();
    model.midquote.vol = 0.0;
    model.midquote.drift = 0.0;
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let next: Vec<f64> = (0..solver.grid.slice_len()).map(|k| k as f64 * 0.01).collect();
    for i in 0..2 {
        for y_idx in 0..3 {
            for p_idx in 0..5 {
                let got = solver.price_expectation(&next, i, y_idx, p_idx);
                assert_abs_diff_eq!(
                    got,
                    next[solver.grid.node_index(i, y_idx, p_idx)],
                    epsilon = 1e-12
                );
            }
        }
    }
}

#[test]
fn price_expectation_matches_gaussian_mgf_on_linear_slice() {
    // With psi(p) = a p linear, linear interpolation is exact and
    // log E[e^{a P'}] = a (p + mu w) + a^2 sigma^2 w / 2 while the nodes
    // stay inside the grid.
    let mut model = tiny_model();
    model.midquote.vol = 0.002;
    model.midquote.drift = 0.001;
    let mut params = tiny_params();
    params.quad_nodes = 7;
    let solver = Solver::new(&model, &params).unwrap();
    let g = &solver.grid;
    let a = 3.0;
    let mut next = vec![0.0; g.slice_len()];
    for i in 0..2 {
        for y_idx in 0..3 {
            for p_idx in 0..g.n_p() {
                next[g.node_index(i, y_idx, p_idx)] = a * g.price(p_idx);
            }
        }
    }
    let w = params.kappa * params.step;
    let p = g.price(2);
    let expect = a * (p + model.midquote.drift * w) + a * a * model.midquote.vol.powi(2) * w / 2.0;
    let got = solver.price_expectation(&next, 0, 1, 2);
    assert_abs_diff_eq!(got, expect, epsilon = 1e-9);
}

#[test]
fn price_expectation_matches_direct_quadrature() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let g = &solver.grid;
    let next: Vec<f64> = (0..g.slice_len()).map(|k| ((k * 37) % 11) as f64 * 0.3 - 1.0).collect();
    let gh = GaussHermite::new(params.quad_nodes);
    let w = params.kappa * params.step;
    let sd = model.midquote.vol * w.sqrt();
    for p_idx in 0..g.n_p() {
        let p = g.price(p_idx);
        // Direct sum of w_k e^{psi}, interpolating psi piecewise-linearly
        // with edge clamping, then log.
        let direct: f64 = gh
            .nodes
            .iter()
            .zip(&gh.weights)
            .map(|(z, wt)| {
                let pp = p + sd * z;
                let u = ((pp - g.price(0)) / g.tick).clamp(0.0, (g.n_p() - 1) as f64);
                let lo = (u.floor() as usize).min(g.n_p() - 2);
                let frac = u - lo as f64;
                let psi = next[g.node_index(1, 2, lo)] * (1.0 - frac)
                    + next[g.node_index(1, 2, lo + 1)] * frac;
                wt * psi.exp()
            })
            .sum();
        assert_abs_diff_eq!(
            solver.price_expectation(&next, 1, 2, p_idx),
            direct.ln(),
            epsilon = 1e-12
        );
    }
}

#[test]
fn spread_expectation_two_state_hand_check() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let g = &solver.grid;
    let mut next = vec![0.0; g.slice_len()];
    next[g.node_index(0, 1, 2)] = 1.0;
    next[g.node_index(1, 1, 2)] = 2.0;
    let q = 1.0 - (-0.5f64 * 0.3).exp();
    let expect = ((1.0 - q) * 1.0f64.exp() + q * 2.0f64.exp()).ln();
    assert_abs_diff_eq!(solver.spread_expectation(&next, 0, 1, 2), expect, epsilon = 1e-12);
    let expect1 = ((1.0 - q) * 2.0f64.exp() + q * 1.0f64.exp()).ln();
    assert_abs_diff_eq!(solver.spread_expectation(&next, 1, 1, 2), expect1, epsilon = 1e-12);
}

#[test]
fn fill_candidate_two_outcome_hand_check() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let g = &solver.grid;
    let mut next = vec![0.0; g.slice_len()];
    let y0 = g.y_index(0).unwrap();
    let y_up = g.y_index(10).unwrap();
    next[g.node_index(0, y0, 2)] = 0.4;
    next[g.node_index(0, y_up, 2)] = -0.2;
    // Bid at the best in state 0 (spread one tick): price 1.0 - 0.005 = 0.995,
    // intensity 0.20, fill probability 1 - e^{-0.06}.
    let p1 = 1.0 - (-0.20f64 * 0.3).exp();
    let shift = 0.5 * 0.995 * 10.0;
    let expect = ((1.0 - p1) * 0.4f64.exp() + p1 * f64::exp(shift - 0.2)).ln();
    let got = solver
        .fill_candidate_value(&next, 0, y0, 2, Side::Bid, Level::Best, 10)
        .unwrap();
    assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    // Size zero ignores the level and returns the resting value.
    let z = solver.fill_candidate_value(&next, 0, y0, 2, Side::Bid, Level::Plus, 0).unwrap();
    assert_abs_diff_eq!(z, 0.4, epsilon = 1e-15);
}

#[test]
fn fill_best_response_scans_all_candidates() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let term = solver.terminal_slice();
    for i in 0..2 {
        for y_idx in 0..3 {
            for p_idx in 0..5 {
                for side in [Side::Bid, Side::Ask] {
                    let (best, level, size) =
                        solver.fill_best_response(&term, i, y_idx, p_idx, side);
                    let mut brute = f64::INFINITY;
                    for l in [0i64, 10] {
                        for lev in Level::ALL {
                            if let Some(v) = solver
                                .fill_candidate_value(&term, i, y_idx, p_idx, side, lev, l)
                            {
                                brute = brute.min(v);
                            }
                        }
                    }
                    assert_abs_diff_eq!(best, brute, epsilon = 1e-12);
                    let chosen = solver
                        .fill_candidate_value(&term, i, y_idx, p_idx, side, level, size)
                        .unwrap();
                    assert_abs_diff_eq!(chosen, best, epsilon = 1e-12);
                }
            }
        }
    }
}

#[test]
fn at_the_inventory_cap_only_the_unwinding_side_quotes() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let term = solver.terminal_slice();
    let g = &solver.grid;
    let y_top = g.y_index(10).unwrap();
    let (_, _, bid_size) = solver.fill_best_response(&term, 0, y_top, 2, Side::Bid);
    assert_eq!(bid_size, 0, "no headroom to buy at the cap");
}

#[test]
fn impulse_matches_brute_force_and_prefers_small_orders() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let term = solver.terminal_slice();
    let g = &solver.grid;
    for i in 0..2 {
        for y_idx in 0..3 {
            for p_idx in 0..5 {
                let (val, e) = solver.impulse_value(&term, i, y_idx, p_idx);
                let y = g.y_levels[y_idx];
                let s = model.spread_of_state(i);
                let p = g.price(p_idx);
                let mut brute = f64::INFINITY;
                for cand in [-10i64, 0, 10] {
                    let ya = y + cand;
                    if let Some(ya_idx) = g.y_index(ya) {
                        let v = 0.5 * market_cash(cand as f64, p, s, &model.fees)
                            + term[g.node_index(i, ya_idx, p_idx)];
                        brute = brute.min(v);
                    }
                }
                assert_abs_diff_eq!(val, brute, epsilon = 1e-12);
                assert!(e.abs() <= 10);
            }
        }
    }
    // A flat book in a fee-free world gains nothing from trading; the tie
    // must resolve to doing nothing.
    let (_, e) = solver.impulse_value(&term, 0, g.y_index(0).unwrap(), 2);
    assert_eq!(e, 0);
}

#[test]
fn static_world_value_is_constant_in_time() {
    // No price noise, no spread jumps, no fills: every expectation returns
    // the next slice and the obstacle never strictly improves, so psi is
    // constant across time steps.
    let mut model = tiny_model();
    model.midquote.vol = 0.0;
    model.midquote.drift = 0.0;
    model.spread.jump_rate = 0.0;
    let zero = vec![0.0; 2];
    model.fills =
        FillModel::new(2, [zero.clone(), zero.clone(), zero.clone()], [zero.clone(), zero.clone(), zero.clone()])
            .unwrap();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let sol = solver.solve().unwrap();
    let term = sol.value.slice(2);
    for t in 0..2 {
        for (a, b) in sol.value.slice(t).iter().zip(term) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }
    // And every chosen action is an inert make.
    for action in sol.policy.slice(0) {
        match action {
            Action::Make { bid_size: 0, ask_size: 0, .. } => {}
            other => panic!("expected inert make, got {other:?}"),
        }
    }
}

#[test]
fn step_node_beats_every_enumerated_action() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let term = solver.terminal_slice();
    for i in 0..2 {
        for y_idx in 0..3 {
            for p_idx in 0..5 {
                let (val, chosen) = solver.step_node(&term, i, y_idx, p_idx);
                // The stored action reproduces the stored value.
                let v_chosen = solver.evaluate_action(&term, i, y_idx, p_idx, chosen).unwrap();
                assert_abs_diff_eq!(val, v_chosen, epsilon = 1e-12);
                // No enumerated alternative is strictly better.
                for bid in Level::ALL {
                    for ask in Level::ALL {
                        for bl in [0i64, 10] {
                            for al in [0i64, 10] {
                                if let Some(v) = solver.evaluate_action(
                                    &term,
                                    i,
                                    y_idx,
                                    p_idx,
                                    Action::Make { bid, ask, bid_size: bl, ask_size: al },
                                ) {
                                    assert!(v >= val - 1e-12);
                                }
                            }
                        }
                    }
                }
                for e in [-10i64, 0, 10] {
                    if let Some(v) =
                        solver.evaluate_action(&term, i, y_idx, p_idx, Action::Take { size: e })
                    {
                        assert!(v >= val - 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn value_dominates_the_impulse_obstacle_everywhere() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let sol = solver.solve().unwrap();
    let g = &solver.grid;
    for t in (0..g.n_steps).rev() {
        let next = sol.value.slice(t + 1);
        let here = sol.value.slice(t);
        for i in 0..g.n_states {
            for y_idx in 0..g.n_y() {
                for p_idx in 0..g.n_p() {
                    let (m_val, _) = solver.impulse_value(next, i, y_idx, p_idx);
                    assert!(here[g.node_index(i, y_idx, p_idx)] <= m_val + 1e-12);
                }
            }
        }
    }
}

#[test]
fn better_fill_odds_never_hurt() {
    // Raising one fill intensity can only improve the market maker's value:
    // posting nothing is always available, so psi must not increase anywhere.
    let model = tiny_model();
    let params = tiny_params();
    let base = Solver::new(&model, &params).unwrap().solve().unwrap();
    let bumped_model = {
        let mut m = tiny_model();
        m.fills = m.fills.with_cell(Side::Bid, Level::Best, 0, 0.28);
        m
    };
    let bumped = Solver::new(&bumped_model, &params).unwrap().solve().unwrap();
    for (a, b) in bumped.value.data.iter().zip(&base.value.data) {
        assert!(*a <= b + 1e-10, "bumped {a} > base {b}");
    }
}

#[test]
fn solve_is_reproducible_across_thread_counts() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let a = solver.solve().unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| solver.solve().unwrap());
    assert_eq!(a.value.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
               b.value.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.policy.data, b.policy.data);
}

#[test]
fn artifact_round_trips_byte_identically() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let sol = solver.solve().unwrap();
    let header = ArtifactHeader {
        model_fingerprint: model.fingerprint(),
        grid: GridSpec::from_grid(&solver.grid),
        scheme: params.clone(),
        tie_break_version: TIE_BREAK_VERSION,
    };
    let bytes = encode_policy(&header, &sol.policy).unwrap();
    assert_eq!(&bytes[..8], b"LOBMMPA1");
    let decoded = decode_policy(&bytes).unwrap();
    assert_eq!(decoded.header, header);
    assert_eq!(decoded.policy.data, sol.policy.data);
    let re_encoded = encode_policy(&decoded.header, &decoded.policy).unwrap();
    assert_eq!(re_encoded, bytes);
}

#[test]
fn artifact_rejects_corruption() {
    let model = tiny_model();
    let params = tiny_params();
    let solver = Solver::new(&model, &params).unwrap();
    let sol = solver.solve().unwrap();
    let header = ArtifactHeader {
        model_fingerprint: model.fingerprint(),
        grid: GridSpec::from_grid(&solver.grid),
        scheme: params.clone(),
        tie_break_version: TIE_BREAK_VERSION,
    };
    let bytes = encode_policy(&header, &sol.policy).unwrap();
    assert!(decode_policy(&bytes[..bytes.len() - 1]).is_err());
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(decode_policy(&bad_magic).is_err());
    let mut bad_kind = bytes.clone();
    let body_start = 12 + u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    bad_kind[body_start] = 9;
    assert!(decode_policy(&bad_kind).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Random policies over the tiny grid survive an encode/decode cycle.
    #[test]
    fn random_policy_round_trips(seed in 0u64..1000) {
        let model = tiny_model();
        let params = tiny_params();
        let solver = Solver::new(&model, &params).unwrap();
        let grid = &solver.grid;
        let n = (grid.n_steps + 1) * grid.slice_len();
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next_u = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        let levels = [Level::Minus, Level::Best, Level::Plus];
        let data: Vec<Action> = (0..n)
            .map(|_| {
                if next_u() % 4 == 0 {
                    Action::Take { size: [-10i64, 0, 10][next_u() % 3] }
                } else {
                    Action::Make {
                        bid: levels[next_u() % 3],
                        ask: levels[next_u() % 3],
                        bid_size: [0i64, 10][next_u() % 2],
                        ask_size: [0i64, 10][next_u() % 2],
                    }
                }
            })
            .collect();
        let policy = PolicyTensor { n_steps: grid.n_steps, slice_len: grid.slice_len(), data };
        let header = ArtifactHeader {
            model_fingerprint: model.fingerprint(),
            grid: GridSpec::from_grid(grid),
            scheme: params.clone(),
            tie_break_version: TIE_BREAK_VERSION,
        };
        let bytes = encode_policy(&header, &policy).unwrap();
        let decoded = decode_policy(&bytes).unwrap();
        prop_assert_eq!(decoded.policy.data, policy.data);
    }
}
