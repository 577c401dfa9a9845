//! The 90 cerebral regions of the AAL atlas and a coarse five-region lobe
//! partition used for intra/inter-network summaries.
//!
//! The lobe grouping is a convenience default, not an anatomical reference;
//! manifests may carry their own partition.

/// Region ids of [`aal90_partition`].
pub const LOBE_NAMES: [&str; 5] = [
    "frontal",
    "temporal",
    "parietal",
    "occipital",
    "subcortical-central",
];

const FRONTAL: usize = 0;
const TEMPORAL: usize = 1;
const PARIETAL: usize = 2;
const OCCIPITAL: usize = 3;
const CENTRAL: usize = 4;

/// Left/right pairs in atlas order with their lobe.
const PAIRS: [(&str, usize); 45] = [
    ("PreCG", FRONTAL),
    ("SFGdor", FRONTAL),
    ("ORBsup", FRONTAL),
    ("MFG", FRONTAL),
    ("ORBmid", FRONTAL),
    ("IFGoperc", FRONTAL),
    ("IFGtriang", FRONTAL),
    ("ORBinf", FRONTAL),
    ("ROL", FRONTAL),
    ("SMA", FRONTAL),
    ("OLF", FRONTAL),
    ("SFGmed", FRONTAL),
    ("ORBsupmed", FRONTAL),
    ("REC", FRONTAL),
    ("INS", CENTRAL),
    ("ACG", CENTRAL),
    ("DCG", CENTRAL),
    ("PCG", CENTRAL),
    ("HIP", CENTRAL),
    ("PHG", CENTRAL),
    ("AMYG", CENTRAL),
    ("CAL", OCCIPITAL),
    ("CUN", OCCIPITAL),
    ("LING", OCCIPITAL),
    ("SOG", OCCIPITAL),
    ("MOG", OCCIPITAL),
    ("IOG", OCCIPITAL),
    ("FFG", TEMPORAL),
    ("PoCG", PARIETAL),
    ("SPG", PARIETAL),
    ("IPL", PARIETAL),
    ("SMG", PARIETAL),
    ("ANG", PARIETAL),
    ("PCUN", PARIETAL),
    ("PCL", PARIETAL),
    ("CAU", CENTRAL),
    ("PUT", CENTRAL),
    ("PAL", CENTRAL),
    ("THA", CENTRAL),
    ("HES", TEMPORAL),
    ("STG", TEMPORAL),
    ("TPOsup", TEMPORAL),
    ("MTG", TEMPORAL),
    ("TPOmid", TEMPORAL),
    ("ITG", TEMPORAL),
];

pub const AAL90_SIZE: usize = 90;

/// Zero-based indices of HIP.L, HIP.R, PHG.L and PHG.R.
pub const HIPPOCAMPAL_SEEDS: [usize; 4] = [36, 37, 38, 39];

/// Region names such as `HIP.L`, in atlas order.
pub fn aal90_names() -> Vec<String> {
    PAIRS
        .iter()
        .flat_map(|(name, _)| [format!("{name}.L"), format!("{name}.R")])
        .collect()
}

/// Lobe id per region, indexing [`LOBE_NAMES`].
pub fn aal90_partition() -> Vec<usize> {
    PAIRS.iter().flat_map(|&(_, lobe)| [lobe, lobe]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shape() {
        let names = aal90_names();
        assert_eq!(names.len(), AAL90_SIZE);
        assert_eq!(names[HIPPOCAMPAL_SEEDS[0]], "HIP.L");
        assert_eq!(names[HIPPOCAMPAL_SEEDS[3]], "PHG.R");
        let part = aal90_partition();
        assert_eq!(part.len(), AAL90_SIZE);
        for lobe in 0..LOBE_NAMES.len() {
            assert!(part.contains(&lobe));
        }
    }
}
