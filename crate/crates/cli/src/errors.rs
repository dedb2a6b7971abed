//! Mapping of failures to exit codes: 1 bad config or arguments, 2 I/O,
//! 3 internal invariant violation.

use std::fmt;

use stationing::forecast::ForecastError;
use stationing::network::NetworkError;
use stationing::scenario::ScenarioError;
use stationing::sim::SimError;
use stationing::stationing::StationingError;

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug)]
struct Coded {
    code: u8,
    message: String,
}

impl fmt::Display for Coded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Coded {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    Coded {
        code: EXIT_CONFIG,
        message: message.into(),
    }
    .into()
}

pub fn io(message: impl Into<String>) -> anyhow::Error {
    Coded {
        code: EXIT_IO,
        message: message.into(),
    }
    .into()
}

pub fn internal(message: impl Into<String>) -> anyhow::Error {
    Coded {
        code: EXIT_INTERNAL,
        message: message.into(),
    }
    .into()
}

fn network_code(e: &NetworkError) -> u8 {
    match e {
        NetworkError::MissingFile(_) | NetworkError::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn forecast_code(e: &ForecastError) -> u8 {
    match e {
        ForecastError::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn sim_code(e: &SimError) -> u8 {
    match e {
        SimError::Io(_) => EXIT_IO,
        SimError::Network(n) => network_code(n),
        _ => EXIT_CONFIG,
    }
}

fn stationing_code(e: &StationingError) -> u8 {
    match e {
        StationingError::Io(_) => EXIT_IO,
        StationingError::Sim(s) => sim_code(s),
        _ => EXIT_CONFIG,
    }
}

fn scenario_code(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Io(_) => EXIT_IO,
        ScenarioError::ConfigInvalid(_) => EXIT_CONFIG,
        ScenarioError::Network(n) => network_code(n),
        ScenarioError::Forecast(f) => forecast_code(f),
        ScenarioError::Sim(s) => sim_code(s),
        ScenarioError::Stationing(s) => stationing_code(s),
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<Coded>() {
            return c.code;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<NetworkError>() {
            return network_code(e);
        }
        if let Some(e) = cause.downcast_ref::<ForecastError>() {
            return forecast_code(e);
        }
        if let Some(e) = cause.downcast_ref::<SimError>() {
            return sim_code(e);
        }
        if let Some(e) = cause.downcast_ref::<StationingError>() {
            return stationing_code(e);
        }
        if let Some(e) = cause.downcast_ref::<ScenarioError>() {
            return scenario_code(e);
        }
    }
    EXIT_CONFIG
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes() {
        let missing: anyhow::Error = NetworkError::MissingFile("x".into()).into();
        assert_eq!(exit_code(&missing), EXIT_IO);
        let wrapped = Err::<(), _>(ScenarioError::ConfigInvalid("bad".into()))
            .context("loading config")
            .unwrap_err();
        assert_eq!(exit_code(&wrapped), EXIT_CONFIG);
        let nested: anyhow::Error = StationingError::Sim(Box::new(SimError::Network(
            NetworkError::MissingFile("y".into()),
        )))
        .into();
        assert_eq!(exit_code(&nested), EXIT_IO);
        assert_eq!(exit_code(&internal("broken")), EXIT_INTERNAL);
        assert_eq!(exit_code(&io("gone").context("reading")), EXIT_IO);
    }
}
