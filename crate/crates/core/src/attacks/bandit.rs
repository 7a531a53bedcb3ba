//! Bandit gradient attack with a time prior and a tiled data prior.
//!
//! A latent prior vector lives on a coarse grid (one cell per `tile x tile`
//! pixel block, upsampled by nearest neighbor). Every iteration spends two
//! score queries on antithetic perturbations of the prior and nudges the
//! prior toward the loss gradient, then descends the image along the
//! upsampled prior and projects back onto the perturbation ball.
//!
//! Pinned update, with exploration `delta_e` and prior rate `eta_p`:
//!
//! ```text
//! u ~ N(0, I_grid)
//! q+- = normalize(up(v +- delta_e u))
//! l+- = loss(x + delta_e q+-)
//! v  <- v + eta_p * (l+ - l-) / (2 delta_e) * u
//! x  <- clip(project_eps(x - h * normalize(up(v))))
//! ```

use crate::attacks::{
    project_to_ball, AttackBudget, AttackError, AttackTrace, Referee, StepValue, Termination,
    TraceBuilder,
};
use crate::loss::{adversary_loss, LossForm};
use crate::oracle::QueryOracle;
use crate::rng::SeededRng;
use crate::tensor::{normalized, ImageTensor, Shape};

#[derive(Debug, Clone)]
pub struct BanditParams {
    /// Exploration scale for both the prior probe and the image-space probe.
    pub exploration: f64,
    /// Prior learning rate.
    pub prior_lr: f64,
    /// Image step size per iteration.
    pub image_step: f64,
    /// Side length of one data-prior tile in pixels.
    pub tile: usize,
}

impl Default for BanditParams {
    fn default() -> Self {
        BanditParams {
            exploration: 0.01,
            prior_lr: 0.1,
            image_step: 0.05,
            tile: 2,
        }
    }
}

/// The latent prior over the coarse grid. Public so estimator behavior can
/// be probed directly.
#[derive(Debug, Clone)]
pub struct BanditState {
    pub prior: Vec<f64>,
    pub grid: Shape,
    pub image: Shape,
    pub tile: usize,
}

impl BanditState {
    pub fn new(image: Shape, tile: usize) -> Result<Self, AttackError> {
        if tile == 0 {
            return Err(AttackError::InvalidParameter("tile must be >= 1".into()));
        }
        let grid = Shape::new(
            image.width.div_ceil(tile),
            image.height.div_ceil(tile),
            image.channels,
        );
        Ok(BanditState {
            prior: vec![0.0; grid.dim()],
            grid,
            image,
            tile,
        })
    }

    /// Nearest-neighbor upsample of a grid vector to image resolution.
    pub fn upsample(&self, grid_data: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.image.dim()];
        for r in 0..self.image.height {
            for c in 0..self.image.width {
                for ch in 0..self.image.channels {
                    out[self.image.index(r, c, ch)] =
                        grid_data[self.grid.index(r / self.tile, c / self.tile, ch)];
                }
            }
        }
        out
    }

    /// One two-query antithetic update of the prior at the current iterate.
    pub fn update<O: QueryOracle>(
        &mut self,
        oracle: &mut O,
        x: &ImageTensor,
        form: &LossForm,
        params: &BanditParams,
        rng: &mut SeededRng,
    ) -> Result<(), crate::oracle::OracleError> {
        let u = rng.gaussian_vec(self.grid.dim());
        let mut loss_pair = [0.0; 2];
        for (slot, sign) in loss_pair.iter_mut().zip([1.0, -1.0]) {
            let perturbed: Vec<f64> = self
                .prior
                .iter()
                .zip(&u)
                .map(|(v, ui)| v + sign * params.exploration * ui)
                .collect();
            let probe_dir = self.upsample(&perturbed);
            let probe = match normalized(&probe_dir) {
                Some(dir) => x.add_scaled(&dir, params.exploration).clip01(),
                None => x.clone(),
            };
            *slot = adversary_loss(&oracle.score_query(&probe)?, form);
        }
        let signal = (loss_pair[0] - loss_pair[1]) / (2.0 * params.exploration);
        for (v, &ui) in self.prior.iter_mut().zip(&u) {
            *v += params.prior_lr * signal * ui;
        }
        Ok(())
    }

    /// Upsampled prior at image resolution.
    pub fn image_prior(&self) -> Vec<f64> {
        self.upsample(&self.prior)
    }
}

pub fn bandit_td_attack<O: QueryOracle>(
    oracle: &mut O,
    referee: &mut Referee,
    x0: &ImageTensor,
    c0: usize,
    budget: &AttackBudget,
    params: &BanditParams,
    rng: &mut SeededRng,
) -> Result<AttackTrace, AttackError> {
    if params.exploration <= 0.0 || params.prior_lr <= 0.0 || params.image_step <= 0.0 {
        return Err(AttackError::InvalidParameter(
            "bandit exploration, prior_lr and image_step must be > 0".into(),
        ));
    }
    let mut state = BanditState::new(x0.shape(), params.tile)?;
    let form = LossForm::untargeted(c0);
    let mut trace = TraceBuilder::new("bandit_td", c0, budget.epsilon);
    let mut current = x0.clone();

    match oracle.score_query(&current) {
        Ok(probs) => {
            let verdict = referee.judge(x0, c0, &current);
            if verdict.success {
                trace.accept(oracle.queries_used(), 0.0, StepValue::Value(probs[c0]), &verdict);
                return Ok(trace.finish(
                    Termination::Success,
                    oracle.queries_used(),
                    &current,
                    0.0,
                ));
            }
        }
        Err(_) => {
            return Ok(trace.finish(
                Termination::BudgetExhausted,
                oracle.queries_used(),
                &current,
                0.0,
            ))
        }
    }

    loop {
        if state.update(oracle, &current, &form, params, rng).is_err() {
            let l2 = current.l2_distance(x0);
            return Ok(trace.finish(
                Termination::BudgetExhausted,
                oracle.queries_used(),
                &current,
                l2,
            ));
        }
        if let Some(dir) = normalized(&state.image_prior()) {
            // descend: the prior tracks the loss gradient
            let stepped = current.add_scaled(&dir, -params.image_step);
            current = project_to_ball(&stepped, x0, budget.epsilon).clip01();
        }
        let l2 = current.l2_distance(x0);
        let verdict = referee.judge(x0, c0, &current);
        let success = trace.accept(
            oracle.queries_used(),
            l2,
            StepValue::Value(verdict.prob_original),
            &verdict,
        );
        if success {
            return Ok(trace.finish(
                Termination::Success,
                oracle.queries_used(),
                &current,
                l2,
            ));
        }
    }
}
