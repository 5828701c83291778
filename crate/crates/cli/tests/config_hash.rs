use std::path::Path;

use proptest::prelude::*;
use uhs_cli::LoadedConfig;

const SECTIONS: [&str; 5] = [
    "[model]\nsignature = { n = 2, k = 1 }\nfamily = { name = \"gaussian_bump\", amplitude = 0.1, width = 2.0 }\n",
    "[grid]\nhalf_width = 10.0\npoints = 32\n",
    "[solver]\nepsilon = 1e-3\ndt = 2e-3\nt_final = 0.5\n",
    "[sweep]\nepsilon = [1e-2, 1e-3]\n",
    "[diagnostics]\nestimates = [\"smoothing\", \"continuation\"]\nntilde = 3.0\n",
];

fn text(order: &[usize], keys_reversed: bool) -> String {
    let mut s = String::from("schema_version = 1\nseed = 9\n");
    for &i in order {
        let mut lines: Vec<&str> = SECTIONS[i].lines().collect();
        if keys_reversed {
            lines[1..].reverse();
        }
        s.push_str(&lines.join("\n"));
        s.push('\n');
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hash_ignores_table_and_key_order(order in Just((0..SECTIONS.len()).collect::<Vec<_>>()).prop_shuffle(), rev in any::<bool>()) {
        let base = LoadedConfig::parse(&text(&[0, 1, 2, 3, 4], false), Path::new("a.toml")).unwrap();
        let other = LoadedConfig::parse(&text(&order, rev), Path::new("b/c.toml")).unwrap();
        prop_assert_eq!(&base.hash, &other.hash);
        prop_assert_eq!(base.config.run_points(), other.config.run_points());
    }
}

#[test]
fn hash_tracks_numerical_content() {
    let base = LoadedConfig::parse(&text(&[0, 1, 2, 3, 4], false), Path::new("a.toml")).unwrap();
    let changed = LoadedConfig::parse(&text(&[0, 1, 2, 3, 4], false).replace("t_final = 0.5", "t_final = 0.6"), Path::new("a.toml")).unwrap();
    assert_ne!(base.hash, changed.hash);
}
