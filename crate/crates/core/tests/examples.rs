//! Every runnable example doubles as a smoke test.

macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        #[path = $file]
        mod $name;

        #[test]
        fn $name() {
            $name::run().expect(concat!(stringify!($name), " should run"));
        }
    };
}

example!(solve_riccati, "../examples/solve_riccati.rs");
example!(closed_loop_simulation, "../examples/closed_loop_simulation.rs");
example!(adjoint_reconstruction, "../examples/adjoint_reconstruction.rs");
example!(convergence_study, "../examples/convergence_study.rs");
example!(custom_problem, "../examples/custom_problem.rs");
example!(reproducible_paths, "../examples/reproducible_paths.rs");
