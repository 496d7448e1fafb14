macro_rules! example {
    ($module:ident, $test:ident) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($module), ".rs"));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!(stringify!($module), " example should run"));
        }
    };
}

example!(dilated_conv, dilated_conv_example_runs);
example!(gradient_check, gradient_check_example_runs);
example!(table_format, table_format_example_runs);
example!(parameter_budget, parameter_budget_example_runs);
example!(mutations, mutations_example_runs);
example!(proxy_dataset, proxy_dataset_example_runs);
example!(train_baseline, train_baseline_example_runs);
example!(evolve, evolve_example_runs);
example!(compare_strategies, compare_strategies_example_runs);
example!(run_config, run_config_example_runs);
