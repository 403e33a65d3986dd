//! Writes a synthetic 25-node file in the CAB text layout, for exercising
//! the `cab` experiment without the original data set.
//!
//! `cargo run --example synthetic_cab -- <path> [seed]`

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "cab_synthetic.txt".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    std::fs::write(&path, hubnet::ingest::synthetic_cab_text(seed))?;
    println!("wrote {path}");
    Ok(())
}
