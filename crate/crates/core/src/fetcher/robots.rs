//! robots.txt parsing.
//!
//! Only `User-agent` and `Disallow` lines are interpreted. A group of
//! consecutive `User-agent` lines owns the rules that follow it. The groups
//! naming our product token apply; if none does, the `*` groups apply.
//! Rules are plain path prefixes.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RobotsPolicy {
    pub host: String,
    pub disallow_prefixes: Vec<String>,
    /// False when the file could not be fetched and allow-all was assumed.
    pub fetched: bool,
}

impl RobotsPolicy {
    pub fn allow_all(host: &str) -> Self {
        Self {
            host: host.to_string(),
            disallow_prefixes: Vec::new(),
            fetched: false,
        }
    }

    pub fn parse(host: &str, text: &str, user_agent: &str) -> Self {
        Self {
            host: host.to_string(),
            disallow_prefixes: disallow_rules(text, user_agent),
            fetched: true,
        }
    }

    /// `path` is the request path including any query string.
    pub fn allows(&self, path: &str) -> bool {
        !self
            .disallow_prefixes
            .iter()
            .any(|prefix| path.starts_with(prefix.as_str()))
    }
}

/// The product token of a user-agent string: `FocusCrawl/0.1 (+url)` gives
/// `focuscrawl`.
pub fn product_token(user_agent: &str) -> String {
    user_agent
        .split(|c: char| c == '/' || c.is_whitespace())
        .next()
        .unwrap_or_default()
        .to_ascii_lowercase()
}

struct Group {
    agents: Vec<String>,
    disallow: Vec<String>,
}

fn disallow_rules(text: &str, user_agent: &str) -> Vec<String> {
    let token = product_token(user_agent);
    let mut groups: Vec<Group> = Vec::new();
    let mut last_was_agent = false;

    for line in text.lines() {
        let line = line.split('#').next().unwrap_or_default().trim();
        let Some((field, value)) = line.split_once(':') else {
            continue;
        };
        let field = field.trim().to_ascii_lowercase();
        let value = value.trim();
        match field.as_str() {
            "user-agent" => {
                if !last_was_agent || groups.is_empty() {
                    groups.push(Group {
                        agents: Vec::new(),
                        disallow: Vec::new(),
                    });
                }
                if let Some(g) = groups.last_mut() {
                    g.agents.push(value.to_ascii_lowercase());
                }
                last_was_agent = true;
            }
            "disallow" => {
                if let Some(g) = groups.last_mut() {
                    if !value.is_empty() {
                        g.disallow.push(value.to_string());
                    }
                }
                last_was_agent = false;
            }
            _ => last_was_agent = false,
        }
    }

    let named = |g: &&Group| {
        g.agents
            .iter()
            .any(|a| a != "*" && !token.is_empty() && token.contains(a.as_str()))
    };
    let specific: Vec<&Group> = groups.iter().filter(named).collect();
    let chosen: Vec<&Group> = if specific.is_empty() {
        groups.iter().filter(|g| g.agents.iter().any(|a| a == "*")).collect()
    } else {
        specific
    };
    chosen.into_iter().flat_map(|g| g.disallow.iter().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const UA: &str = "FocusCrawl/0.1";

    #[test]
    fn disallow_prefix() {
        let p = RobotsPolicy::parse("h", "User-agent: *\nDisallow: /private\n", UA);
        assert!(!p.allows("/private/x"));
        assert!(!p.allows("/private"));
        assert!(p.allows("/public"));
    }

    #[test]
    fn disallow_root_blocks_everything() {
        let p = RobotsPolicy::parse("h", "User-agent: *\nDisallow: /", UA);
        assert!(!p.allows("/"));
        assert!(!p.allows("/anything?q=1"));
    }

    #[test]
    fn empty_disallow_allows_all() {
        let p = RobotsPolicy::parse("h", "User-agent: *\nDisallow:\n", UA);
        assert!(p.allows("/x"));
        assert!(RobotsPolicy::allow_all("h").allows("/x"));
    }

    // Rule trace for the mixed file:
    //   group 1 agents [badbot]           -> /
    //   group 2 agents [*]                -> /tmp
    //   group 3 agents [focuscrawl, other] -> /private, /drafts
    // Our token "focuscrawl" names group 3, so only its rules apply.
    #[test]
    fn mixed_agent_sections() {
        let text = "\
# comment
User-agent: BadBot
Disallow: /

User-agent: *
Disallow: /tmp

User-agent: focuscrawl
User-agent: other
Disallow: /private   # inline comment
Disallow: /drafts
";
        let p = RobotsPolicy::parse("h", text, UA);
        assert_eq!(p.disallow_prefixes, ["/private", "/drafts"]);
        assert!(p.allows("/tmp/x"));
        assert!(p.allows("/"));
        assert!(!p.allows("/drafts/1"));

        let other = RobotsPolicy::parse("h", text, "SomeoneElse/2.0");
        assert_eq!(other.disallow_prefixes, ["/tmp"]);
    }

    #[test]
    fn rules_before_any_agent_are_ignored() {
        let p = RobotsPolicy::parse("h", "Disallow: /x\nUser-agent: *\nDisallow: /y", UA);
        assert_eq!(p.disallow_prefixes, ["/y"]);
    }

    #[test]
    fn product_token_extraction() {
        assert_eq!(product_token("FocusCrawl/0.1 (+http://x)"), "focuscrawl");
        assert_eq!(product_token("bot"), "bot");
    }
}
