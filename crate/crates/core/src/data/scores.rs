//! Scale-score thresholds for cohort assignment and risk grading.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SDS_RANGE: (u32, u32) = (20, 80);
pub const PHQ9_RANGE: (u32, u32) = (0, 27);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Experimental,
    Control,
    Excluded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    NotGraded,
    Moderate,
    Severe,
}

/// Binary label of a sequence. `Risk` is class index 0, matching the one-hot
/// layout of the classification loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskLabel {
    Risk,
    Control,
}

impl RiskLabel {
    pub fn class_index(self) -> usize {
        match self {
            RiskLabel::Risk => 0,
            RiskLabel::Control => 1,
        }
    }

    pub fn is_risk(self) -> bool {
        self == RiskLabel::Risk
    }
}

impl Group {
    pub fn label(self) -> Option<RiskLabel> {
        match self {
            Group::Experimental => Some(RiskLabel::Risk),
            Group::Control => Some(RiskLabel::Control),
            Group::Excluded => None,
        }
    }
}

fn check(name: &str, score: u32, (lo, hi): (u32, u32)) -> Result<()> {
    if score < lo || score > hi {
        return Err(Error::ScoreOutOfRange(format!(
            "{name} score {score} outside {lo}..={hi}"
        )));
    }
    Ok(())
}

/// Experimental iff SDS > 58 and PHQ-9 > 8; Control iff SDS < 47 and PHQ-9 < 2.
pub fn assign_group(sds: u32, phq9: u32) -> Result<Group> {
    check("SDS", sds, SDS_RANGE)?;
    check("PHQ-9", phq9, PHQ9_RANGE)?;
    Ok(if sds > 58 && phq9 > 8 {
        Group::Experimental
    } else if sds < 47 && phq9 < 2 {
        Group::Control
    } else {
        Group::Excluded
    })
}

pub fn grade_sds(sds: u32) -> Result<Grade> {
    check("SDS", sds, SDS_RANGE)?;
    Ok(match sds {
        70.. => Grade::Severe,
        59..=69 => Grade::Moderate,
        _ => Grade::NotGraded,
    })
}

pub fn grade_phq(phq9: u32) -> Result<Grade> {
    check("PHQ-9", phq9, PHQ9_RANGE)?;
    Ok(match phq9 {
        15.. => Grade::Severe,
        9..=14 => Grade::Moderate,
        _ => Grade::NotGraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_examples() {
        assert_eq!(assign_group(63, 12).unwrap(), Group::Experimental);
        assert_eq!(assign_group(34, 0).unwrap(), Group::Control);
        assert_eq!(assign_group(55, 5).unwrap(), Group::Excluded);
    }

    #[test]
    fn group_boundaries_are_strict() {
        assert_eq!(assign_group(58, 12).unwrap(), Group::Excluded);
        assert_eq!(assign_group(59, 8).unwrap(), Group::Excluded);
        assert_eq!(assign_group(59, 9).unwrap(), Group::Experimental);
        assert_eq!(assign_group(47, 0).unwrap(), Group::Excluded);
        assert_eq!(assign_group(46, 2).unwrap(), Group::Excluded);
        assert_eq!(assign_group(46, 1).unwrap(), Group::Control);
    }

    #[test]
    fn grade_examples() {
        assert_eq!(grade_sds(70).unwrap(), Grade::Severe);
        assert_eq!(grade_sds(60).unwrap(), Grade::Moderate);
        assert_eq!(grade_sds(58).unwrap(), Grade::NotGraded);
        assert_eq!(grade_sds(69).unwrap(), Grade::Moderate);
        assert_eq!(grade_phq(8).unwrap(), Grade::NotGraded);
        assert_eq!(grade_phq(9).unwrap(), Grade::Moderate);
        assert_eq!(grade_phq(15).unwrap(), Grade::Severe);
        assert_eq!(grade_phq(14).unwrap(), Grade::Moderate);
    }

    #[test]
    fn out_of_range_scores() {
        assert!(matches!(assign_group(19, 0), Err(Error::ScoreOutOfRange(_))));
        assert!(matches!(assign_group(81, 0), Err(Error::ScoreOutOfRange(_))));
        assert!(matches!(assign_group(50, 28), Err(Error::ScoreOutOfRange(_))));
        assert!(grade_sds(10).is_err());
        assert!(grade_phq(30).is_err());
    }
}
