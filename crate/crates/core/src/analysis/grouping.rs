use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub name: String,
    pub services: usize,
    pub mean_coupling: f64,
}

/// Contiguous service-count buckets given by their lower bounds; the last
/// bucket is open-ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceBuckets {
    lower_bounds: Vec<usize>,
}

impl ServiceBuckets {
    pub fn from_lower_bounds(bounds: &[usize]) -> Result<Self, AnalysisError> {
        if bounds.is_empty() {
            return Err(AnalysisError::InvalidInput("at least one bucket is required".into()));
        }
        if bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AnalysisError::InvalidInput("bucket bounds must be strictly increasing".into()));
        }
        Ok(ServiceBuckets { lower_bounds: bounds.to_vec() })
    }

    pub fn label(&self, i: usize) -> String {
        let lo = self.lower_bounds[i];
        match self.lower_bounds.get(i + 1) {
            Some(next) if next - 1 == lo => lo.to_string(),
            Some(next) => format!("{lo}-{}", next - 1),
            None => format!("{lo}+"),
        }
    }

    pub fn bucket_of(&self, services: usize) -> Option<usize> {
        self.lower_bounds.iter().rposition(|&lo| services >= lo)
    }

    pub fn len(&self) -> usize {
        self.lower_bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower_bounds.is_empty()
    }
}

impl Default for ServiceBuckets {
    /// 2-5, 6-10, 11-20 and 21+ services.
    fn default() -> Self {
        ServiceBuckets { lower_bounds: vec![2, 6, 11, 21] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub label: String,
    pub projects: Vec<String>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectGroups {
    pub buckets: Vec<BucketSummary>,
    /// Projects with fewer services than the first bucket admits.
    pub below_range: Vec<String>,
}

pub fn group_projects(projects: &[ProjectSummary], buckets: &ServiceBuckets) -> ProjectGroups {
    let mut members: Vec<Vec<&ProjectSummary>> = vec![Vec::new(); buckets.len()];
    let mut below_range = Vec::new();
    for p in projects {
        match buckets.bucket_of(p.services) {
            Some(i) => members[i].push(p),
            None => below_range.push(p.name.clone()),
        }
    }
    let buckets = members
        .into_iter()
        .enumerate()
        .map(|(i, ps)| {
            let mut values: Vec<f64> = ps.iter().map(|p| p.mean_coupling).collect();
            values.sort_by(f64::total_cmp);
            let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
            let median = match values.len() {
                0 => None,
                n if n % 2 == 1 => Some(values[n / 2]),
                n => Some((values[n / 2 - 1] + values[n / 2]) / 2.0),
            };
            BucketSummary {
                label: buckets.label(i),
                projects: ps.iter().map(|p| p.name.clone()).collect(),
                mean,
                median,
            }
        })
        .collect();
    ProjectGroups { buckets, below_range }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project(name: &str, services: usize, mean_coupling: f64) -> ProjectSummary {
        ProjectSummary { name: name.into(), services, mean_coupling }
    }

    #[test]
    fn one_per_bucket() {
        let b = ServiceBuckets::from_lower_bounds(&[1, 6]).unwrap();
        let g = group_projects(&[project("p", 3, 0.2), project("q", 8, 0.4)], &b);
        assert_eq!(g.buckets[0].projects, vec!["p"]);
        assert_eq!(g.buckets[1].projects, vec!["q"]);
        assert_eq!(g.buckets[0].label, "1-5");
        assert_eq!(g.buckets[1].label, "6+");
    }

    #[test]
    fn empty_input() {
        let g = group_projects(&[], &ServiceBuckets::default());
        assert_eq!(g.buckets.len(), 4);
        assert!(g.buckets.iter().all(|b| b.projects.is_empty() && b.mean.is_none() && b.median.is_none()));
    }

    #[test]
    fn below_first_bound() {
        let g = group_projects(&[project("mono", 1, 0.0)], &ServiceBuckets::default());
        assert_eq!(g.below_range, vec!["mono"]);
    }

    #[test]
    fn ten_projects_hand_aggregates() {
        let ps = [
            project("a", 2, 0.10),
            project("b", 3, 0.30),
            project("c", 5, 0.20),
            project("d", 6, 0.50),
            project("e", 9, 0.40),
            project("f", 10, 0.90),
            project("g", 7, 0.60),
            project("h", 12, 0.05),
            project("i", 20, 0.15),
            project("j", 40, 0.70),
        ];
        let g = group_projects(&ps, &ServiceBuckets::default());
        let stats: Vec<_> = g.buckets.iter().map(|b| (b.projects.len(), b.mean, b.median)).collect();
        // 2-5: {0.10, 0.30, 0.20} mean 0.2 median 0.2
        // 6-10: {0.50, 0.40, 0.90, 0.60} mean 0.6 median 0.55
        // 11-20: {0.05, 0.15} mean 0.1 median 0.1
        // 21+: {0.70}
        let close = |x: Option<f64>, y: f64| (x.unwrap() - y).abs() < 1e-12;
        assert_eq!(stats[0].0, 3);
        assert!(close(stats[0].1, 0.2) && close(stats[0].2, 0.2));
        assert_eq!(stats[1].0, 4);
        assert!(close(stats[1].1, 0.6) && close(stats[1].2, 0.55));
        assert!(close(stats[2].1, 0.1) && close(stats[2].2, 0.1));
        assert!(close(stats[3].1, 0.7) && close(stats[3].2, 0.7));
    }

    #[test]
    fn bounds_must_increase() {
        assert!(ServiceBuckets::from_lower_bounds(&[5, 5]).is_err());
        assert!(ServiceBuckets::from_lower_bounds(&[]).is_err());
    }
}
