//! Print the embedded default criteria registry: buckets, thresholds,
//! scopes, and the dependency gates between criteria.
//!
//! Run with: cargo run --example show_registry

use ccpa_audit::model::default_config;

fn main() {
    let registry = default_config().criteria;
    println!(
        "default registry ({} criteria)\n",
        registry.criteria().len()
    );
    for spec in registry.topo_order() {
        println!("{}", spec.id);
        println!("  {}", spec.description);
        println!("  scope: {:?}", spec.scope);
        if let Some(dep) = spec.depends_on {
            println!("  gated on: {dep}");
        }
        println!(
            "  threshold: {} of {} bucket(s){}",
            spec.threshold,
            spec.buckets.len(),
            if spec.match_toll_free {
                " plus toll-free number matcher"
            } else {
                ""
            }
        );
        for bucket in &spec.buckets {
            println!("    - {}", bucket.join(" | "));
        }
        println!();
    }
}
