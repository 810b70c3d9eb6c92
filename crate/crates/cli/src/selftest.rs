use anyhow::{anyhow, Result};

use ser_core::selftest::{frame_contracts, run_all};

use crate::config::{resolve_seed, SelftestArgs};

pub fn selftest(args: SelftestArgs, global_seed: Option<u64>) -> Result<()> {
    let seed = resolve_seed(args.seed, global_seed)?;
    let mut failed = 0;
    for c in run_all(seed)? {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        failed += usize::from(!c.passed());
        println!("{verdict}  {:<40} {:.3e} < {:.0e}", c.name, c.value, c.tolerance);
    }
    let (mfcc, logmel) = frame_contracts();
    for (name, got, want) in [("MFCC shape (2.5 s)", mfcc, (248, 40)), ("log-mel shape (6 s)", logmel, (598, 128))] {
        let ok = got == want;
        failed += usize::from(!ok);
        println!(
            "{}  {:<40} {}x{} (expected {}x{})",
            if ok { "PASS" } else { "FAIL" },
            name,
            got.0,
            got.1,
            want.0,
            want.1
        );
    }
    if failed > 0 {
        return Err(anyhow!("{failed} self-checks failed"));
    }
    Ok(())
}
