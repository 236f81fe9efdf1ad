use crate::metrics::top_arms;

/// Whether `mu_hat` ranks the `m` best arms (by true mean `mu`) ε-correctly:
/// for every ordered pair `i ≠ j` among them, `μ̂_i ≤ μ̂_j` holds exactly when
/// `μ_i + ε ≤ μ_j`. The condition is evaluated literally, so two top arms
/// closer than `eps` can never be ranked ε-correctly.
pub fn is_epsilon_correct_ranking(mu_hat: &[f64], mu: &[f64], eps: f64, m: usize) -> bool {
    if mu_hat.len() != mu.len() || m > mu.len() {
        return false;
    }
    let top = top_arms(mu, m);
    top.iter().all(|&i| top.iter().filter(|&&j| j != i).all(|&j| (mu_hat[i] <= mu_hat[j]) == (mu[i] + eps <= mu[j])))
}
