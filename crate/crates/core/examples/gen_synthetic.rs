//! Generates a synthetic BTF, writes it, reads it back and prints a few
//! texel values for the first direction pairs.
//!
//! `cargo run --release --example gen_synthetic -- [out.btf]`

use triplane::btf_data::{generate_synthetic_btf, load_btf, save_btf, SyntheticBtfSpec};

fn main() -> triplane::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic.btf".into());
    let d = generate_synthetic_btf(&SyntheticBtfSpec::mixed(32, 32, 1))?;
    save_btf(&d, &out)?;
    let back = load_btf(&out)?;
    println!("{} pairs of {}x{} -> {out} (round trip equal: {})", back.num_pairs(), back.width(), back.height(), back == d);
    for p in 0..4.min(d.num_pairs()) {
        let pair = &d.pairs()[p];
        println!(
            "pair {p}: wi.z {:.3} wo.z {:.3}  texel(0,0) {:?}",
            pair.wi().z,
            pair.wo().z,
            d.value(p, 0, 0)
        );
    }
    Ok(())
}
