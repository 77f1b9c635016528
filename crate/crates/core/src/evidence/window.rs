use alloc::vec::Vec;

use super::{Alert, EvidenceError};
use crate::time::{minutes, TimeWindow};

/// Platform noise such as watchdog or inhibitor alerts.
pub fn is_watchdog(alert: &Alert) -> bool {
    let name = alert.name.to_ascii_lowercase();
    ["watchdog", "inhibitor", "infoinhibitor"]
        .iter()
        .any(|n| name.contains(n))
}

/// Chooses the investigation window from golden-signal alerts.
///
/// Anchors are golden-signal alerts on application entities. Without any,
/// every non-watchdog alert anchors the window; a watchdog-only list anchors
/// on all alerts. The window opens `lead_margin_minutes` before the earliest
/// anchor and closes at the latest anchor's `last_seen`.
pub fn select_window(
    alerts: &[Alert],
    lead_margin_minutes: i64,
) -> Result<(TimeWindow, Vec<Alert>), EvidenceError> {
    if alerts.is_empty() {
        return Err(EvidenceError::NoAlerts);
    }
    let golden: Vec<Alert> = alerts
        .iter()
        .filter(|a| a.signal.is_golden() && a.entity.is_application() && !is_watchdog(a))
        .cloned()
        .collect();
    let anchors = if !golden.is_empty() {
        golden
    } else {
        let quiet: Vec<Alert> = alerts.iter().filter(|a| !is_watchdog(a)).cloned().collect();
        if quiet.is_empty() {
            alerts.to_vec()
        } else {
            quiet
        }
    };
    let start = anchors.iter().map(|a| a.first_seen).min().expect("non-empty");
    let end = anchors.iter().map(|a| a.last_seen).max().expect("non-empty");
    let start = start - minutes(lead_margin_minutes);
    let window = TimeWindow::new(start, end.max(start))
        .map_err(|e| EvidenceError::Invalid(alloc::format!("{e}")))?;
    Ok((window, anchors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::parse_entity_id;
    use crate::evidence::{Severity, Signal};
    use crate::time::Timestamp;
    use alloc::string::ToString;

    fn ts(hm: &str) -> Timestamp {
        alloc::format!("2025-06-01T{hm}:00Z").parse().unwrap()
    }

    fn alert(name: &str, entity: &str, signal: Signal, from: &str, to: &str) -> Alert {
        Alert {
            name: name.to_string(),
            entity: parse_entity_id(entity).unwrap(),
            severity: Severity::Critical,
            signal,
            first_seen: ts(from),
            last_seen: ts(to),
        }
    }

    #[test]
    fn single_error_alert() {
        let a = alert("HighErrorRate", "otel-demo/Service/frontend", Signal::Errors, "10:00", "10:20");
        let (w, anchors) = select_window(core::slice::from_ref(&a), 5).unwrap();
        assert_eq!((w.start(), w.end()), (ts("09:55"), ts("10:20")));
        assert_eq!(anchors, alloc::vec![a]);
    }

    #[test]
    fn watchdog_only_falls_back() {
        let a = alert("Watchdog", "monitoring/Deployment/prometheus", Signal::Other, "08:00", "12:00");
        let (w, anchors) = select_window(core::slice::from_ref(&a), 5).unwrap();
        assert_eq!((w.start(), w.end()), (ts("07:55"), ts("12:00")));
        assert_eq!(anchors, alloc::vec![a]);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(select_window(&[], 5), Err(EvidenceError::NoAlerts));
    }

    #[test]
    fn mixed_fixture_matches_independent_scan() {
        let alerts = [
            alert("Watchdog", "monitoring/Deployment/prom", Signal::Other, "07:00", "13:00"),
            alert("HighLatency", "otel-demo/Service/cart", Signal::Latency, "10:07", "10:31"),
            alert("KubeNodePressure", "cluster/Node/worker-1", Signal::Errors, "09:00", "09:30"),
            alert("HighErrorRate", "otel-demo/Service/frontend", Signal::Errors, "10:02", "10:25"),
            alert("CpuSaturation", "otel-demo/Deployment/ad", Signal::Saturation, "09:40", "11:00"),
        ];
        let (w, anchors) = select_window(&alerts, 5).unwrap();
        // Independent scan: golden signal, application kind, not watchdog.
        let mut lo = None;
        let mut hi = None;
        for a in &alerts {
            let golden = matches!(a.signal, Signal::Errors | Signal::Latency | Signal::Traffic);
            if golden && a.entity.kind() != "Node" && !a.name.contains("Watchdog") {
                lo = Some(lo.map_or(a.first_seen, |l: Timestamp| l.min(a.first_seen)));
                hi = Some(hi.map_or(a.last_seen, |h: Timestamp| h.max(a.last_seen)));
            }
        }
        assert_eq!(w.start(), lo.unwrap() - minutes(5));
        assert_eq!(w.end(), hi.unwrap());
        assert_eq!(anchors.len(), 2);
    }
}
