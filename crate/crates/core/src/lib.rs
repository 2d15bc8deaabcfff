//! Navigation among moving obstacles with a deep Q-network planning over a
//! velocity-space occupancy grid of a differential-drive robot.
//!
//! Geometry, grid and network code is generic over [`scalar::Scalar`]; the
//! aliases below fix it to `f64`, which is what training uses.

pub mod actions;
pub mod agent;
pub mod config;
pub mod dovs;
pub mod kinematics;
pub mod nn;
pub mod scalar;
pub mod sim;

pub type Pose = kinematics::Pose<f64>;
pub type Velocity = kinematics::Velocity<f64>;
pub type KinodynamicLimits = kinematics::KinodynamicLimits<f64>;
pub type DynamicWindow = kinematics::DynamicWindow<f64>;
pub type GoalArc = kinematics::GoalArc<f64>;
pub type ObstacleEstimate = dovs::ObstacleEstimate<f64>;
pub type DovsParams = dovs::DovsParams<f64>;
pub type RobotSituation = dovs::RobotSituation<f64>;
pub type StateVector = dovs::StateVector<f64>;
pub type ActionTable = actions::ActionTable<f64>;
pub type QNetwork = nn::QNetwork<f64>;
pub type OptimizerState = nn::OptimizerState<f64>;

pub use config::Config;
