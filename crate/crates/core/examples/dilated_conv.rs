// Temporally dilated 1D convolution and its zero-inflated equivalent.

use msnas::tensor::{inflate_filter, temporal_conv1d_dilated, TemporalFilter};

pub fn run_example() -> anyhow::Result<()> {
    let signal: Vec<f64> = (0..12).map(|t| (t as f64 * 0.7).sin()).collect();
    let taps = vec![0.25, 0.5, 0.25];
    for r in [1, 2, 4, 8] {
        let filter = TemporalFilter::new(taps.clone(), r)?;
        let dilated = temporal_conv1d_dilated(&signal, &filter)?;
        let inflated = temporal_conv1d_dilated(&signal, &filter.inflated())?;
        assert_eq!(dilated, inflated);
        let shown: Vec<String> = dilated.iter().map(|v| format!("{v:+.2}")).collect();
        println!("r={r} k'={:?}\n  {}", inflate_filter(&taps, r), shown.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
