//! Coverage-probability analysis for service-oriented architecture models.
//!
//! A model is a set of components with state variables and services. Each
//! service carries a contract and a behavior model. It also has a coverage
//! region: the inputs on which the service is known to be error-free. A
//! usage profile drives the system with random inputs. The coverage
//! probability is the chance that no service is ever entered outside its
//! region, which bounds the probability of correct execution from below.
//!
//! ```
//! use covprob::dsl::{parse_model, parse_profile};
//! use covprob::engine::exact_coverage;
//! use num_rational::BigRational;
//!
//! let model = parse_model("
//!     component Tank {
//!         state int level = 0;
//!         service fill(int n) { level = level + n; }
//!         service drain(int n) covered n <= level { level = level - n; }
//!     }").unwrap();
//! let profile = parse_profile("
//!     profile p { a ~ uniform(0, 1); b ~ uniform(0, 1); Tank.fill(a); Tank.drain(b); }
//! ").unwrap();
//! let r = exact_coverage(&model, &profile).unwrap();
//! assert_eq!(r.probability, BigRational::new(3.into(), 4.into()));
//! ```

pub mod formula;
pub mod model;
pub mod dsl;
pub mod engine;
pub mod proofs;
pub mod cli;
