//! Synthetic apps, intents and filters.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;

use super::config::GeneratorConfig;
use crate::icc::{AbstractFilter, AbstractIntent, ConcreteFilter, ConcreteIntent};

const PLATFORM_WORDS: &[&str] = &[
    "VIEW",
    "SEND",
    "EDIT",
    "PICK",
    "GET_CONTENT",
    "DIAL",
    "CALL",
    "MAIN",
    "SEARCH",
    "SENDTO",
    "SEND_MULTIPLE",
    "INSERT",
    "DELETE",
    "RUN",
    "SYNC",
    "ANSWER",
    "WEB_SEARCH",
    "ATTACH_DATA",
    "CHOOSER",
    "BOOT_COMPLETED",
    "PACKAGE_ADDED",
    "MEDIA_MOUNTED",
    "SCREEN_ON",
    "BATTERY_LOW",
    "POWER_CONNECTED",
    "TIMEZONE_CHANGED",
    "USER_PRESENT",
    "SET_WALLPAPER",
    "CREATE_SHORTCUT",
    "ASSIST",
    "VOICE_COMMAND",
    "PROCESS_TEXT",
];

const VENDORS: &[&str] = &[
    "andromo",
    "appybuilder",
    "biznessapps",
    "seattleclouds",
    "apptoolkit",
    "mobincube",
    "appsbar",
    "ibuildapp",
    "conduit",
    "gamesalad",
];

const VENDOR_WORDS: &[&str] = &[
    "FEED_STARTING",
    "FEED_STOPPED",
    "PLAY",
    "PAUSE",
    "REFRESH",
    "NOTIFY",
    "SYNC_DONE",
    "LOGIN",
    "OPEN_ITEM",
    "SHARE_ITEM",
    "DOWNLOAD_COMPLETE",
    "UPDATE_WIDGET",
    "ALARM",
    "MESSAGE",
    "LOCATION_UPDATE",
];

/// Category pool; `DEFAULT` is by far the most common.
pub const CATEGORIES: &[&str] = &[
    "DEFAULT",
    "BROWSABLE",
    "LAUNCHER",
    "HOME",
    "ALTERNATIVE",
    "SELECTED_ALTERNATIVE",
    "TAB",
    "INFO",
    "PREFERENCE",
    "OPENABLE",
    "MONKEY",
    "CAR_MODE",
];

pub fn platform_action(word: &str) -> String {
    format!("android.intent.action.{word}")
}

/// Zipf choice: entry `k` (from 0) has weight `(k + 1)^-exponent`.
fn skewed<'a, R: Rng>(rng: &mut R, items: &'a [&'a str], exponent: f64) -> &'a str {
    let weights = (1..=items.len()).map(|k| (k as f64).powf(-exponent));
    let dist = WeightedIndex::new(weights).expect("pools are nonempty");
    items[dist.sample(rng)]
}

#[derive(Debug, Clone)]
struct App {
    actions: Vec<String>,
}

fn make_apps<R: Rng>(rng: &mut R, count: usize) -> Vec<App> {
    let mut devs: Vec<(&str, u32)> = Vec::new();
    (0..count)
        .map(|_| {
            let vendor = *VENDORS.choose(rng).expect("vendor pool is nonempty");
            let shared = devs
                .iter()
                .filter(|(v, _)| *v == vendor)
                .copied()
                .collect::<Vec<_>>();
            let dev = match shared.choose(rng) {
                Some(&(_, d)) if rng.gen_bool(0.3) => d,
                _ => {
                    let d = rng.gen_range(10_000..100_000);
                    devs.push((vendor, d));
                    d
                }
            };
            let app = rng.gen_range(10_000..1_000_000);
            let n = rng.gen_range(1..=3);
            let actions = VENDOR_WORDS
                .choose_multiple(rng, n)
                .map(|w| format!("com.{vendor}.dev{dev}.app{app}.intent.action.{w}"))
                .collect();
            App { actions }
        })
        .collect()
}

fn intent_categories<R: Rng>(rng: &mut R) -> BTreeSet<String> {
    let roll: f64 = rng.gen();
    let (default, other) = match roll {
        r if r < 0.55 => (true, false),
        r if r < 0.75 => (false, false),
        r if r < 0.9 => (true, true),
        _ => (false, true),
    };
    let mut cats = BTreeSet::new();
    if default {
        cats.insert("DEFAULT".to_owned());
    }
    if other {
        cats.extend(CATEGORIES[1..].choose(rng).map(|c| c.to_string()));
    }
    cats
}

fn filter_categories<R: Rng>(rng: &mut R) -> BTreeSet<String> {
    let mut cats = BTreeSet::new();
    if rng.gen_bool(0.8) {
        cats.insert("DEFAULT".to_owned());
    }
    let extra = rng.gen_range(0..=2);
    for c in CATEGORIES[1..].choose_multiple(rng, extra) {
        cats.insert(c.to_string());
    }
    if cats.is_empty() {
        cats.insert("DEFAULT".to_owned());
    }
    cats
}

/// Precise intents and filters; deterministic for a given RNG state.
pub fn generate_corpus<R: Rng>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> (Vec<AbstractIntent>, Vec<AbstractFilter>) {
    let apps = make_apps(rng, cfg.apps);
    let words = &PLATFORM_WORDS[..cfg.platform_words.clamp(1, PLATFORM_WORDS.len())];
    let intents = (0..cfg.intents)
        .map(|_| {
            let action = if rng.gen_bool(cfg.omega_rate) {
                None
            } else if rng.gen_bool(cfg.vendor_rate) {
                let app = apps.choose(rng).expect("at least one app");
                app.actions.choose(rng).cloned()
            } else {
                Some(platform_action(skewed(rng, words, cfg.zipf)))
            };
            let concrete = ConcreteIntent {
                action: action.map(|a| a.to_lowercase()),
                categories: intent_categories(rng)
                    .into_iter()
                    .map(|c| c.to_lowercase())
                    .collect(),
            };
            AbstractIntent::from_concrete(&concrete).expect("generated text is in the alphabet")
        })
        .collect();
    let filters = (0..cfg.filters)
        .map(|_| {
            let app = apps.choose(rng).expect("at least one app");
            let mut actions = BTreeSet::new();
            if rng.gen_bool(cfg.vendor_rate) {
                let n = rng.gen_range(1..=app.actions.len().min(2));
                actions.extend(app.actions.choose_multiple(rng, n).cloned());
                if rng.gen_bool(0.2) {
                    actions.insert(platform_action(skewed(rng, words, cfg.zipf)));
                }
            } else {
                let n = rng.gen_range(1..=3);
                for _ in 0..n {
                    actions.insert(platform_action(skewed(rng, words, cfg.zipf)));
                }
            }
            let concrete = ConcreteFilter {
                actions: actions.into_iter().map(|a| a.to_lowercase()).collect(),
                categories: filter_categories(rng)
                    .into_iter()
                    .map(|c| c.to_lowercase())
                    .collect(),
            };
            AbstractFilter::from_concrete(&concrete).expect("generated text is in the alphabet")
        })
        .collect();
    (intents, filters)
}
