mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ces_core::allocation::nucleolus;
use ces_core::solver::{solve_lp, solve_milp, LpStatus};

use common::games::{self, prenucleolus};
use common::lp::{milp_by_enumeration, simplex, vertex_enumeration, Outcome};

#[test]
fn dense_simplex_agrees_with_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut infeasible = 0;
    for _ in 0..200 {
        let lp = common::random_lp(&mut rng);
        match (simplex(&lp), vertex_enumeration(&lp)) {
            (Outcome::Optimal { obj: a, x }, Outcome::Optimal { obj: b, .. }) => {
                assert!((a - b).abs() < 1e-7, "{a} vs {b} on {lp:?}");
                assert!(lp.feasible(&x, 1e-7));
            }
            (Outcome::Infeasible, Outcome::Infeasible) => infeasible += 1,
            (a, b) => panic!("{a:?} vs {b:?} on {lp:?}"),
        }
    }
    assert!(infeasible > 0);
}

#[test]
fn fixture_games_have_known_nucleoli() {
    for (name, expect) in [
        ("games/symmetric3.csv", vec![6.0, 6.0, 6.0]),
        ("games/asymmetric3.csv", vec![10.0 / 3.0, 16.0 / 3.0, 28.0 / 3.0]),
    ] {
        let game = common::table_game(name);
        let v = common::values_of(&game);
        let oracle = prenucleolus(&v, 3);
        let lib = nucleolus(&game).unwrap().allocation;
        for i in 0..3 {
            assert!((oracle[i] - expect[i]).abs() < 1e-7, "{name}: oracle {oracle:?}");
            assert!((lib[i] - expect[i]).abs() < 1e-6, "{name}: library {lib:?}");
        }
        assert!(games::kohlberg_holds(&v, &oracle, 1e-7));
    }
}

#[test]
fn kohlberg_rejects_a_perturbed_point() {
    let v = common::values_of(&common::table_game("games/asymmetric3.csv"));
    let mut x = prenucleolus(&v, 3);
    x[0] += 0.5;
    x[2] -= 0.5;
    assert!(!games::kohlberg_holds(&v, &x, 1e-7));
}

#[test]
fn random_games_are_subadditive_and_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 3..=5 {
        let v = games::random_subadditive(&mut rng, n);
        assert!(games::is_subadditive(&v, n));
        let oracle = prenucleolus(&v, n);
        let lib = nucleolus(&common::table_from_values(n, &v)).unwrap().allocation;
        for i in 0..n {
            assert!((oracle[i] - lib[i]).abs() < 1e-6, "n={n}: {oracle:?} vs {lib:?}");
        }
    }
}

#[test]
fn library_solvers_on_small_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let lp = common::random_lp(&mut rng);
        let sol = solve_lp(&lp.to_library()).unwrap();
        match vertex_enumeration(&lp) {
            Outcome::Optimal { obj, .. } => assert!((sol.objective_value - obj).abs() < 1e-7),
            _ => assert_eq!(sol.status, LpStatus::Infeasible),
        }
        let (mip, bins) = common::random_milp(&mut rng);
        let sol = solve_milp(&mip.to_library_mip(&bins)).unwrap();
        match milp_by_enumeration(&mip, &bins) {
            Outcome::Optimal { obj, .. } => assert!((sol.objective_value - obj).abs() < 1e-6),
            _ => assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}

#[test]
fn fixture_communities_load() {
    for (name, n) in [("community5", 5), ("community10", 10), ("proportional_witness", 3)] {
        assert_eq!(common::community(name).n_buildings(), n);
    }
}
