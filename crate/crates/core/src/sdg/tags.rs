use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::SdgError;

/// Tags whose value propagates along data flow.
pub const VALUE_TAGS: &[&str] = &[
    "req_URI",
    "client_URI",
    "client_redirect_uri",
    "code",
    "access_token",
    "client_cert",
    "code_verifier",
    "code_challenge",
    "code_challenge_method",
    "req_client_id",
    "stored_client_id",
    "stored_URI",
    "stored_challenge",
    "state",
];

/// Tags anchored at a statement without propagation.
pub const STRUCTURAL_TAGS: &[&str] = &[
    "auth_req",
    "token_req",
    "redirect",
    "error",
    "db_read",
    "db_delete",
    "db_store",
    "gen_token",
    "gen_code",
    "b64_encode",
    "b64_decode",
    "sha256",
    "add_cert",
    "uri_abs_check",
    "uri_frag_check",
];

pub fn is_value_tag(t: &str) -> bool {
    VALUE_TAGS.contains(&t)
}

pub fn is_known_tag(t: &str) -> bool {
    is_value_tag(t) || STRUCTURAL_TAGS.contains(&t)
}

pub const DEFAULT_TAG_CONFIG: &str = include_str!("../../../../config/oauth-tags");

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    builtins: Vec<String>,
    #[serde(default, rename = "regexMatchers")]
    regex_matchers: Vec<String>,
    #[serde(default)]
    sources: BTreeMap<String, OneOrMany>,
    #[serde(default, rename = "fieldKeys")]
    field_keys: BTreeMap<String, OneOrMany>,
    #[serde(default)]
    markers: BTreeMap<String, OneOrMany>,
}

#[derive(Debug, Clone)]
pub struct FieldKey {
    pub pattern: String,
    pub regex: Regex,
    pub tags: Vec<String>,
}

/// Which APIs and field accesses seed which tags.
#[derive(Debug, Clone)]
pub struct TagConfig {
    pub builtins: BTreeSet<String>,
    pub regex_matchers: BTreeSet<String>,
    /// API name -> value tags of its result.
    pub sources: BTreeMap<String, Vec<String>>,
    /// Matched against access paths such as `request.redirect_uri`.
    pub field_keys: Vec<FieldKey>,
    /// API or function name -> structural tags of the call (or entry) site.
    pub markers: BTreeMap<String, Vec<String>>,
    pub digest: String,
}

impl TagConfig {
    pub fn parse(text: &str) -> Result<TagConfig, SdgError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| SdgError::Config(e.message().to_string()))?;
        let check = |tags: &[String]| -> Result<(), SdgError> {
            match tags.iter().find(|t| !is_known_tag(t)) {
                Some(t) => Err(SdgError::UnknownTag(t.clone())),
                None => Ok(()),
            }
        };
        let mut sources = BTreeMap::new();
        for (api, tags) in raw.sources {
            let tags = tags.into_vec();
            check(&tags)?;
            sources.insert(api, tags);
        }
        let mut markers = BTreeMap::new();
        for (api, tags) in raw.markers {
            let tags = tags.into_vec();
            check(&tags)?;
            markers.insert(api, tags);
        }
        let mut field_keys = Vec::new();
        for (pattern, tags) in raw.field_keys {
            let tags = tags.into_vec();
            check(&tags)?;
            let regex = Regex::new(&pattern)
                .map_err(|e| SdgError::Config(format!("field key `{pattern}`: {e}")))?;
            field_keys.push(FieldKey {
                pattern,
                regex,
                tags,
            });
        }
        let mut builtins: BTreeSet<String> = raw.builtins.into_iter().collect();
        builtins.extend(sources.keys().cloned());
        builtins.extend(raw.regex_matchers.iter().cloned());
        Ok(TagConfig {
            builtins,
            regex_matchers: raw.regex_matchers.into_iter().collect(),
            sources,
            field_keys,
            markers,
            digest: hex_digest(text.as_bytes()),
        })
    }

    pub fn default_config() -> TagConfig {
        TagConfig::parse(DEFAULT_TAG_CONFIG).expect("bundled tag configuration is valid")
    }

    /// Every tag some configuration entry can produce.
    pub fn covered_tags(&self) -> BTreeSet<&str> {
        self.sources
            .values()
            .chain(self.markers.values())
            .chain(self.field_keys.iter().map(|k| &k.tags))
            .flatten()
            .map(String::as_str)
            .collect()
    }

    pub fn field_tags(&self, path: &str) -> BTreeSet<&str> {
        self.field_keys
            .iter()
            .filter(|k| k.regex.is_match(path))
            .flat_map(|k| k.tags.iter().map(String::as_str))
            .collect()
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
