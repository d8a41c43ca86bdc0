//! Compare analytic gradients against central finite differences for every
//! architecture, printing the worst relative error per parameter group.
use seqrank::grad::check::{gradcheck, GradcheckConfig};
use seqrank::model::{Arch, Variant};

fn main() -> seqrank::Result<()> {
    for (arch, variant) in [(Arch::Rnn, Variant::Full), (Arch::Lstm, Variant::Full), (Arch::Lstm, Variant::Reduced)] {
        let cfg = GradcheckConfig { arch, variant, seeds: 5, ..GradcheckConfig::default() };
        println!("{arch} / {variant}");
        for g in gradcheck(&cfg)? {
            println!(
                "  {:<24} {:>5} entries  rel {:.2e}  abs(small) {:.2e}  {}",
                g.group,
                g.entries,
                g.max_rel_error,
                g.max_abs_error_small,
                if g.passes() { "ok" } else { "FAIL" }
            );
        }
    }
    Ok(())
}
