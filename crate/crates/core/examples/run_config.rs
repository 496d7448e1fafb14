// Presets, TOML round trips and command-line use of the `msnas` front end.

use msnas::config::RunConfig;

pub fn run_example() -> anyhow::Result<()> {
    let cfg = RunConfig::compare();
    let text = cfg.annotated_toml();
    for line in text.lines().filter(|l| l.contains("full-scale")).take(6) {
        println!("{line}");
    }
    assert_eq!(RunConfig::from_toml_str(&text)?, cfg);

    let err = RunConfig::from_toml_str(&text.replace("[trainer]", "[trainer]\ndropout = 0.5")).unwrap_err();
    println!("unknown key: {err}");

    let code = msnas::cli::run(["msnas", "build", "two_stream_flow_to_rgb"]);
    println!("msnas build exited with {code}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
