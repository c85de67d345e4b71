//! Standardized VaR/ES pairs for Normal and skew-t innovations across tail levels.

use fzrisk::dist::{normal_tail_pair, skewt_tail_pair, SkewTParams};
use fzrisk::AlphaLevel;

fn main() -> fzrisk::Result<()> {
    let skew = SkewTParams { nu: 5.0, lambda: -0.5 };
    println!("{:>6} {:>9} {:>9} {:>7} {:>9} {:>9} {:>7}", "alpha", "N a", "N b", "a/b", "Skt a", "Skt b", "a/b");
    for a in [0.01, 0.025, 0.05, 0.10, 0.20] {
        let al = AlphaLevel::new(a)?;
        let n = normal_tail_pair(al);
        let s = skewt_tail_pair(al, skew)?;
        println!(
            "{a:>6.3} {:>9.4} {:>9.4} {:>7.4} {:>9.4} {:>9.4} {:>7.4}",
            n.a,
            n.b,
            n.ratio(),
            s.a,
            s.b,
            s.ratio()
        );
    }
    Ok(())
}
