use super::{evaluate, generate_dataset, Lasso, Learner, PopulationSpec, Ridge};
use crate::error::{Error, Result};
use crate::harness::{RunContext, Simulation};
use crate::heredity::{sample_pattern, solve_heredity_params};
use crate::seed::substream;

/// Factor names read from the design, falling back to plan parameters.
pub const SL_FACTORS: [&str; 7] = ["n", "q", "ENE", "beta.mu", "sigma", "x.cor", "model"];

/// One run: draw a heredity pattern, a training and a test set, fit the
/// learner named by the `model` factor (`lasso` or `ridge`) and return the
/// test logit-R².
///
/// Parameters: `test_size` (default 10000) and `folds` (default 10).
#[derive(Debug, Clone, Default)]
pub struct SlSimulation {
    pub lasso: Lasso,
    pub ridge: Ridge,
}

fn count(ctx: &RunContext<'_>, name: &str) -> Result<usize> {
    let v = ctx.require(name)?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Invalid(format!("`{name}` = {v} is not a count")));
    }
    Ok(v as usize)
}

impl Simulation for SlSimulation {
    fn name(&self) -> &str {
        "sl"
    }

    fn run(&self, ctx: &RunContext<'_>) -> Result<f64> {
        let q = count(ctx, "q")?;
        let ene = ctx.require("ENE")?;
        let train = PopulationSpec {
            q,
            n: count(ctx, "n")?,
            ene,
            beta_mu: ctx.require("beta.mu")?,
            sigma: ctx.require("sigma")?,
            x_cor: ctx.require("x.cor")?,
        };
        let test = PopulationSpec { n: ctx.params.get("test_size").map_or(10_000, |v| *v as usize), ..train };
        let folds = ctx.params.get("folds").map_or(10, |v| *v as usize);
        let learner: Box<dyn Learner> = match ctx.label("model").unwrap_or("lasso") {
            "lasso" => Box::new(Lasso { folds, ..self.lasso.clone() }),
            "ridge" => Box::new(Ridge { folds, ..self.ridge.clone() }),
            other => return Err(Error::UnknownLevel { factor: "model".into(), level: other.into() }),
        };

        let params = solve_heredity_params(ene, q)?;
        let pattern = sample_pattern(&params, substream(ctx.seed, 0));
        let train_set = generate_dataset(&train, &pattern, substream(ctx.seed, 1))?;
        let test_set = generate_dataset(&test, &pattern, substream(ctx.seed, 2))?;
        let fit = learner.fit(&train_set.x, &train_set.y, substream(ctx.seed, 3))?;
        Ok(evaluate(fit.as_ref(), &test_set)?.logit_r2)
    }
}
