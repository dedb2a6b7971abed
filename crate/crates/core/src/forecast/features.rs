//! Trip covariates and their one-hot / standardized encoding.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::{ForecastError, Result};
use crate::network::RouteDirection;

/// Passenger occupancy bucket of a trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidershipCategory {
    Low,
    Moderate,
    High,
    OverCapacity,
}

impl RidershipCategory {
    pub const ALL: [RidershipCategory; 4] = [
        RidershipCategory::Low,
        RidershipCategory::Moderate,
        RidershipCategory::High,
        RidershipCategory::OverCapacity,
    ];

    /// Buckets an occupancy rate (load / capacity): `[0, .3)`, `[.3, .6)`,
    /// `[.6, 1]`, `> 1`.
    pub fn from_occupancy(rate: f64) -> Option<Self> {
        if !(rate >= 0.0) {
            return None;
        }
        Some(if rate < 0.3 {
            Self::Low
        } else if rate < 0.6 {
            Self::Moderate
        } else if rate <= 1.0 {
            Self::High
        } else {
            Self::OverCapacity
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::Moderate => "moderate",
            Self::High => "high",
            Self::OverCapacity => "over_capacity",
        }
    }
}

/// Time-of-day bucket of a trip's start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceWindow {
    EarlyMorning,
    Morning,
    MidDay,
    Afternoon,
    Evening,
}

impl ServiceWindow {
    pub const ALL: [ServiceWindow; 5] = [
        ServiceWindow::EarlyMorning,
        ServiceWindow::Morning,
        ServiceWindow::MidDay,
        ServiceWindow::Afternoon,
        ServiceWindow::Evening,
    ];

    /// Window containing `seconds` since midnight. No service runs between
    /// midnight and 4AM, so those times map to `None`.
    pub fn from_seconds(seconds: u32) -> Option<Self> {
        let hour = seconds / 3600;
        match hour {
            4..=5 => Some(Self::EarlyMorning),
            6..=8 => Some(Self::Morning),
            9..=13 => Some(Self::MidDay),
            14..=17 => Some(Self::Afternoon),
            18..=23 => Some(Self::Evening),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::EarlyMorning => "early_morning",
            Self::Morning => "morning",
            Self::MidDay => "mid_day",
            Self::Afternoon => "afternoon",
            Self::Evening => "evening",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayOfWeek {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl DayOfWeek {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mon => "mon",
            Self::Tue => "tue",
            Self::Wed => "wed",
            Self::Thu => "thu",
            Self::Fri => "fri",
            Self::Sat => "sat",
            Self::Sun => "sun",
        }
    }
}

impl From<Weekday> for DayOfWeek {
    fn from(w: Weekday) -> Self {
        match w {
            Weekday::Mon => Self::Mon,
            Weekday::Tue => Self::Tue,
            Weekday::Wed => Self::Wed,
            Weekday::Thu => Self::Thu,
            Weekday::Fri => Self::Fri,
            Weekday::Sat => Self::Sat,
            Weekday::Sun => Self::Sun,
        }
    }
}

macro_rules! impl_str_enum {
    ($ty:ty, [$($variant:ident),*]) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                $(
                    if s == <$ty>::$variant.as_str() {
                        return Ok(<$ty>::$variant);
                    }
                )*
                Err(format!("unknown {} {s:?}", stringify!($ty)))
            }
        }
    };
}

impl_str_enum!(RidershipCategory, [Low, Moderate, High, OverCapacity]);
impl_str_enum!(
    ServiceWindow,
    [EarlyMorning, Morning, MidDay, Afternoon, Evening]
);
impl_str_enum!(DayOfWeek, [Mon, Tue, Wed, Thu, Fri, Sat, Sun]);

/// Covariates of one scheduled trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripFeatures {
    pub route_direction: RouteDirection,
    pub ridership_category: RidershipCategory,
    pub service_window: ServiceWindow,
    pub year: i32,
    pub month: u32,
    pub day_of_week: DayOfWeek,
    /// Inches per hour.
    pub precipitation: f64,
    /// Degrees Fahrenheit.
    pub temperature: f64,
}

impl TripFeatures {
    /// Features for a trip starting at `start_s` on `date`.
    pub fn for_trip(
        route_direction: RouteDirection,
        date: NaiveDate,
        start_s: u32,
        ridership_category: RidershipCategory,
        precipitation: f64,
        temperature: f64,
    ) -> Option<Self> {
        Some(Self {
            route_direction,
            ridership_category,
            service_window: ServiceWindow::from_seconds(start_s)?,
            year: date.year(),
            month: date.month(),
            day_of_week: date.weekday().into(),
            precipitation,
            temperature,
        })
    }

    pub fn level(&self, feature: Categorical) -> String {
        match feature {
            Categorical::RouteDirection => self.route_direction.to_string(),
            Categorical::ServiceWindow => self.service_window.to_string(),
            Categorical::DayOfWeek => self.day_of_week.to_string(),
            Categorical::RidershipCategory => self.ridership_category.to_string(),
            Categorical::Year => self.year.to_string(),
            Categorical::Month => format!("{:02}", self.month),
        }
    }

    pub fn value(&self, feature: Numerical) -> f64 {
        match feature {
            Numerical::Precipitation => self.precipitation,
            Numerical::Temperature => self.temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTrip {
    pub trip_id: String,
    pub features: TripFeatures,
    /// 1 when a disruption was reported during the trip.
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Categorical {
    RouteDirection,
    ServiceWindow,
    DayOfWeek,
    RidershipCategory,
    Year,
    Month,
}

impl Categorical {
    pub const ALL: [Categorical; 6] = [
        Categorical::RouteDirection,
        Categorical::ServiceWindow,
        Categorical::DayOfWeek,
        Categorical::RidershipCategory,
        Categorical::Year,
        Categorical::Month,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::RouteDirection => "route_direction",
            Self::ServiceWindow => "service_window",
            Self::DayOfWeek => "day_of_week",
            Self::RidershipCategory => "ridership_category",
            Self::Year => "year",
            Self::Month => "month",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Numerical {
    Precipitation,
    Temperature,
}

impl Numerical {
    pub const ALL: [Numerical; 2] = [Numerical::Precipitation, Numerical::Temperature];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Precipitation => "precipitation",
            Self::Temperature => "temperature",
        }
    }
}

impl_str_enum!(
    Categorical,
    [
        RouteDirection,
        ServiceWindow,
        DayOfWeek,
        RidershipCategory,
        Year,
        Month
    ]
);
impl_str_enum!(Numerical, [Precipitation, Temperature]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalBlock {
    pub feature: Categorical,
    /// Sorted lexicographically; column `offset + i` encodes `levels[i]`.
    pub levels: Vec<String>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericColumn {
    pub feature: Numerical,
    pub mean: f64,
    pub std: f64,
    pub column: usize,
}

/// Column layout of a design matrix: categorical one-hot blocks in the
/// canonical [`Categorical::ALL`] order, followed by standardized numerics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub categoricals: Vec<CategoricalBlock>,
    pub numericals: Vec<NumericColumn>,
}

impl FeatureSpec {
    /// Learns levels and standardization statistics from training rows.
    pub fn fit<'a, I>(rows: I, categoricals: &[Categorical], numericals: &[Numerical]) -> Self
    where
        I: IntoIterator<Item = &'a TripFeatures> + Clone,
    {
        let mut cats: Vec<Categorical> = categoricals.to_vec();
        cats.sort();
        cats.dedup();
        let mut nums: Vec<Numerical> = numericals.to_vec();
        nums.sort();
        nums.dedup();

        let mut offset = 0;
        let mut blocks = Vec::with_capacity(cats.len());
        for feature in cats {
            let mut levels: Vec<String> =
                rows.clone().into_iter().map(|f| f.level(feature)).collect();
            levels.sort();
            levels.dedup();
            let width = levels.len();
            blocks.push(CategoricalBlock {
                feature,
                levels,
                offset,
            });
            offset += width;
        }

        let mut columns = Vec::with_capacity(nums.len());
        for feature in nums {
            let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
            for f in rows.clone() {
                let x = f.value(feature);
                n += 1.0;
                let d = x - mean;
                mean += d / n;
                m2 += d * (x - mean);
            }
            let std = if n > 0.0 { (m2 / n).sqrt() } else { 0.0 };
            columns.push(NumericColumn {
                feature,
                mean,
                // Constant columns are only centred.
                std: if std > 0.0 && std.is_finite() {
                    std
                } else {
                    1.0
                },
                column: offset,
            });
            offset += 1;
        }

        Self {
            categoricals: blocks,
            numericals: columns,
        }
    }

    pub fn n_columns(&self) -> usize {
        self.categoricals
            .iter()
            .map(|b| b.levels.len())
            .sum::<usize>()
            + self.numericals.len()
    }

    pub fn included_categoricals(&self) -> Vec<Categorical> {
        self.categoricals.iter().map(|b| b.feature).collect()
    }

    pub fn included_numericals(&self) -> Vec<Numerical> {
        self.numericals.iter().map(|c| c.feature).collect()
    }

    /// Column of a categorical level, if that level was seen in training.
    pub fn column_of(&self, feature: Categorical, level: &str) -> Option<usize> {
        let block = self.categoricals.iter().find(|b| b.feature == feature)?;
        block
            .levels
            .binary_search_by(|l| l.as_str().cmp(level))
            .ok()
            .map(|i| block.offset + i)
    }

    /// Human-readable name of every column.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_columns());
        for block in &self.categoricals {
            for level in &block.levels {
                names.push(format!("{}={}", block.feature, level));
            }
        }
        for col in &self.numericals {
            names.push(col.feature.to_string());
        }
        names
    }

    /// Sparse form of a row: active one-hot columns and standardized numerics.
    pub(crate) fn encode_sparse(&self, features: &TripFeatures) -> Result<EncodedRow> {
        let mut ones = Vec::with_capacity(self.categoricals.len());
        for block in &self.categoricals {
            let level = features.level(block.feature);
            match block.levels.binary_search(&level) {
                Ok(i) => ones.push((block.offset + i) as u32),
                Err(_) => {
                    return Err(ForecastError::UnseenLevel {
                        feature: block.feature.to_string(),
                        level,
                    })
                }
            }
        }
        let numeric = self
            .numericals
            .iter()
            .map(|c| (features.value(c.feature) - c.mean) / c.std)
            .collect();
        Ok(EncodedRow { ones, numeric })
    }

    /// Dense design-matrix row.
    pub fn encode(&self, features: &TripFeatures) -> Result<Vec<f64>> {
        let row = self.encode_sparse(features)?;
        let mut dense = vec![0.0; self.n_columns()];
        for &c in &row.ones {
            dense[c as usize] = 1.0;
        }
        for (col, x) in self.numericals.iter().zip(&row.numeric) {
            dense[col.column] = *x;
        }
        Ok(dense)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EncodedRow {
    pub ones: Vec<u32>,
    pub numeric: Vec<f64>,
}

/// Free-function form of [`FeatureSpec::encode`].
pub fn encode(features: &TripFeatures, spec: &FeatureSpec) -> Result<Vec<f64>> {
    spec.encode(features)
}
