pub mod arima;
pub mod gbt;
pub mod lstm;
pub mod svr;
pub mod trend;
pub mod window;
