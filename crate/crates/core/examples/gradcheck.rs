//! Compares analytic gradients of the full training loss with central
//! finite differences, once as built and once with a corrupted sigmoid
//! backward rule.

use uniex::gradcheck::{self, GradcheckConfig};
use uniex::ndiff::Fault;

fn main() -> uniex::Result<()> {
    let config = GradcheckConfig::default();
    for fault in [None, Some(Fault::SigmoidBackwardScale(1.1))] {
        let r = gradcheck::run(&config, fault)?;
        let verdict = if r.max_rel_error < config.tolerance { "PASS" } else { "FAIL" };
        println!("fault {fault:?}: {} entries, max relative error {:.3e}: {verdict}", r.checked, r.max_rel_error);
        if let Some(w) = r.worst {
            println!("  worst {}[{}] analytic {:.6e} numeric {:.6e}", w.param, w.index, w.analytic, w.numeric);
        }
    }
    Ok(())
}
