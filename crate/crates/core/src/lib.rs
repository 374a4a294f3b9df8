pub mod dimension;
pub mod domain;
pub mod error;
pub mod exec;
pub mod expr;
pub mod linalg;
pub mod multipoint;
pub mod optim;
pub mod pareto;
pub mod perturb;
pub mod strata;
pub mod transversality;
