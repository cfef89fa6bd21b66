//! Exact Shapley values of a small game against both Monte Carlo estimators.

use fraudlens::explain::{exact_shapley, missingness_shapley, permutation_shapley, OracleMode};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Three players: a and b are complements, c is a mild substitute for a.
    let v = |present: &[bool]| {
        let (a, b, c) = (present[0] as u8 as f64, present[1] as u8 as f64, present[2] as u8 as f64);
        0.1 + 0.2 * a + 0.1 * b + 0.4 * a * b + 0.15 * c - 0.1 * a * c
    };
    let exact = exact_shapley(3, OracleMode::Features, v)?;
    let perm = permutation_shapley(3, 1, 2000, 7, |qs| qs.iter().map(|q| v(&q.from_x)).collect());
    let miss = missingness_shapley(3, 2000, 7, &[false; 3], |cs| cs.iter().map(|c| v(c)).collect());
    println!("item   exact    permutation (se)     missingness (se)");
    for (i, name) in ["a", "b", "c"].iter().enumerate() {
        println!(
            "{name:<5} {:>7.4}   {:>7.4} ({:.4})     {:>7.4} ({:.4})",
            exact[i], perm.phi[i], perm.std_error[i], miss.phi[i], miss.std_error[i]
        );
    }
    let total: f64 = exact.iter().sum();
    println!("sum of exact values {total:.4} = v(all) - v(none) = {:.4}", v(&[true; 3]) - v(&[false; 3]));
    println!("missingness values are f(without) - f(with), so their sign is flipped");
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
