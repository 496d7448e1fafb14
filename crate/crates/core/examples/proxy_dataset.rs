// The synthetic two-modality proxy task and its binary file format.

use msnas::proxy::{generate_dataset, DatasetConfig, ProxyDataset};

pub fn run_example() -> anyhow::Result<()> {
    let cfg = DatasetConfig { clips_per_class: 10, size: 8, frames: 8, ..DatasetConfig::default() };
    let data = generate_dataset(&cfg)?;
    println!(
        "{} classes ({} appearance groups x {} motion periods), {} train / {} val clips",
        data.num_classes(),
        cfg.groups,
        cfg.periods,
        data.train.len(),
        data.val.len()
    );
    let (appearance, motion, labels) = data.train.batch(&[0, 1]);
    println!("batch shapes: appearance {:?}, motion {:?}, labels {labels:?}", appearance.shape(), motion.shape());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("proxy.bin");
    data.write_to(&path)?;
    let back = ProxyDataset::read_from(&path)?;
    assert_eq!(back.train.labels, data.train.labels);
    println!("round-tripped {} bytes", std::fs::metadata(&path)?.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
