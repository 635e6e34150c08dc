//! Diarization error rate with an optimal speaker mapping and no collar.

use serde::{Deserialize, Serialize};

use super::hungarian::max_weight_assignment;
use crate::diarize::SpeakerSegment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DerReport {
    pub false_alarm_s: f64,
    pub missed_s: f64,
    pub confusion_s: f64,
    pub total_speech_s: f64,
    pub der: f64,
}

impl DerReport {
    fn from_parts(
        false_alarm_s: f64,
        missed_s: f64,
        confusion_s: f64,
        total_speech_s: f64,
    ) -> Self {
        Self {
            false_alarm_s,
            missed_s,
            confusion_s,
            total_speech_s,
            der: (false_alarm_s + missed_s + confusion_s) / total_speech_s,
        }
    }

    /// Pools several sessions into one report.
    pub fn pooled(reports: &[DerReport]) -> Option<Self> {
        let total: f64 = reports.iter().map(|r| r.total_speech_s).sum();
        (total > 0.0).then(|| {
            Self::from_parts(
                reports.iter().map(|r| r.false_alarm_s).sum(),
                reports.iter().map(|r| r.missed_s).sum(),
                reports.iter().map(|r| r.confusion_s).sum(),
                total,
            )
        })
    }
}

fn sorted_checked(segments: &[SpeakerSegment], which: &'static str) -> Result<Vec<SpeakerSegment>> {
    let mut v: Vec<SpeakerSegment> = segments
        .iter()
        .filter(|s| s.end_s > s.start_s)
        .cloned()
        .collect();
    v.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for w in v.windows(2) {
        if w[1].start_s < w[0].end_s - 1e-9 {
            return Err(Error::OverlappingSegments(which, w[1].start_s));
        }
    }
    Ok(v)
}

/// Which segment (if any) covers each elementary interval of a sweep.
fn label_at(segments: &[SpeakerSegment], cursor: &mut usize, t: f64) -> Option<Option<usize>> {
    while *cursor < segments.len() && segments[*cursor].end_s <= t {
        *cursor += 1;
    }
    segments
        .get(*cursor)
        .filter(|s| s.start_s <= t)
        .map(|s| s.speaker_label)
}

/// Scores `hypothesis` against `reference`.
///
/// Both lists must be non-overlapping. Speakers are matched one-to-one to
/// maximize the jointly labeled time; hypothesis speech without a label
/// always counts as confusion.
pub fn compute_der(
    reference: &[SpeakerSegment],
    hypothesis: &[SpeakerSegment],
) -> Result<DerReport> {
    let reference = sorted_checked(reference, "reference")?;
    let hypothesis = sorted_checked(hypothesis, "hypothesis")?;
    let total: f64 = reference.iter().map(SpeakerSegment::duration_s).sum();
    if total <= 0.0 {
        return Err(Error::EmptyReference);
    }

    let mut bounds: Vec<f64> = reference
        .iter()
        .chain(&hypothesis)
        .flat_map(|s| [s.start_s, s.end_s])
        .collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();

    let mut ref_ids: Vec<Option<usize>> = Vec::new();
    let mut hyp_ids: Vec<usize> = Vec::new();
    let mut overlap: Vec<Vec<f64>> = Vec::new();
    let (mut fa, mut miss, mut both, mut unlabeled) = (0.0, 0.0, 0.0, 0.0);
    let (mut rc, mut hc) = (0, 0);
    for w in bounds.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let d = t1 - t0;
        let mid = 0.5 * (t0 + t1);
        let r = label_at(&reference, &mut rc, mid);
        let h = label_at(&hypothesis, &mut hc, mid);
        match (r, h) {
            (None, None) => {}
            (None, Some(_)) => fa += d,
            (Some(_), None) => miss += d,
            (Some(r), Some(h)) => {
                both += d;
                let Some(h) = h else {
                    unlabeled += d;
                    continue;
                };
                let ri = ref_ids.iter().position(|x| *x == r).unwrap_or_else(|| {
                    ref_ids.push(r);
                    overlap.push(vec![0.0; hyp_ids.len()]);
                    ref_ids.len() - 1
                });
                let hi = hyp_ids.iter().position(|x| *x == h).unwrap_or_else(|| {
                    hyp_ids.push(h);
                    overlap.iter_mut().for_each(|row| row.push(0.0));
                    hyp_ids.len() - 1
                });
                overlap[ri][hi] += d;
            }
        }
    }
    let matched: f64 = max_weight_assignment(&overlap)
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| overlap[i][j]))
        .sum();
    let confusion = (both - matched).max(0.0);
    debug_assert!(confusion + 1e-9 >= unlabeled);
    Ok(DerReport::from_parts(fa, miss, confusion, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(a: f64, b: f64, l: Option<usize>) -> SpeakerSegment {
        SpeakerSegment {
            start_s: a,
            end_s: b,
            speaker_label: l,
            azimuth_deg: None,
            suppressed: false,
            text: None,
        }
    }

    fn four_talkers() -> Vec<SpeakerSegment> {
        (0..4)
            .map(|k| seg(k as f64 * 5.0, k as f64 * 5.0 + 4.0, Some(k)))
            .collect()
    }

    #[test]
    fn identity_is_zero() {
        let r = four_talkers();
        assert_eq!(compute_der(&r, &r).unwrap().der, 0.0);
    }

    #[test]
    fn one_label_for_four_talkers() {
        let r = four_talkers();
        let h: Vec<_> = r.iter().map(|s| seg(s.start_s, s.end_s, Some(7))).collect();
        let rep = compute_der(&r, &h).unwrap();
        assert!((rep.der - 0.75).abs() < 1e-12);
        assert_eq!(rep.false_alarm_s, 0.0);
        assert_eq!(rep.missed_s, 0.0);
    }

    #[test]
    fn silent_hypothesis_is_all_missed() {
        let rep = compute_der(&four_talkers(), &[]).unwrap();
        assert_eq!(rep.der, 1.0);
        assert_eq!(rep.missed_s, 16.0);
    }

    #[test]
    fn empty_reference_errors() {
        assert!(matches!(
            compute_der(&[], &four_talkers()),
            Err(Error::EmptyReference)
        ));
    }

    #[test]
    fn overlapping_input_errors() {
        let bad = vec![seg(0.0, 2.0, Some(0)), seg(1.0, 3.0, Some(1))];
        assert!(compute_der(&bad, &[]).is_err());
        assert!(compute_der(&four_talkers(), &bad).is_err());
    }

    #[test]
    fn false_alarms_can_push_der_above_one() {
        let r = vec![seg(0.0, 1.0, Some(0))];
        let h = vec![seg(0.0, 10.0, Some(0))];
        let rep = compute_der(&r, &h).unwrap();
        assert!((rep.der - 9.0).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_speech_is_confusion() {
        let r = vec![seg(0.0, 2.0, Some(0))];
        let h = vec![seg(0.0, 2.0, None)];
        let rep = compute_der(&r, &h).unwrap();
        assert_eq!(rep.confusion_s, 2.0);
    }

    #[test]
    fn partial_boundaries() {
        let r = vec![seg(0.0, 4.0, Some(0)), seg(5.0, 9.0, Some(1))];
        let h = vec![seg(0.5, 4.5, Some(3)), seg(4.5, 9.0, Some(4))];
        let rep = compute_der(&r, &h).unwrap();
        assert!((rep.missed_s - 0.5).abs() < 1e-12);
        assert!((rep.false_alarm_s - 1.0).abs() < 1e-12);
        assert!(rep.confusion_s.abs() < 1e-12);
    }

    fn arb_segments() -> impl Strategy<Value = Vec<SpeakerSegment>> {
        prop::collection::vec((0.1f64..3.0, 0.0f64..1.0, 0usize..4), 1..12).prop_map(|v| {
            let mut t = 0.0;
            v.into_iter()
                .map(|(len, gap, l)| {
                    t += gap;
                    let s = seg(t, t + len, Some(l));
                    t += len;
                    s
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn shift_and_relabel_invariance(r in arb_segments(), h in arb_segments(), shift in -50.0f64..50.0, perm in Just([2usize, 0, 3, 1])) {
            let base = compute_der(&r, &h).unwrap();
            let mv = |v: &[SpeakerSegment]| -> Vec<SpeakerSegment> {
                v.iter().map(|s| seg(s.start_s + shift, s.end_s + shift, s.speaker_label)).collect()
            };
            let shifted = compute_der(&mv(&r), &mv(&h)).unwrap();
            prop_assert!((base.der - shifted.der).abs() < 1e-9);
            let relabeled: Vec<_> = h.iter().map(|s| seg(s.start_s, s.end_s, s.speaker_label.map(|l| perm[l]))).collect();
            let rl = compute_der(&r, &relabeled).unwrap();
            prop_assert!((base.der - rl.der).abs() < 1e-9);
            prop_assert!(base.der >= 0.0);
            prop_assert!(compute_der(&r, &r).unwrap().der.abs() < 1e-12);
        }
    }
}
