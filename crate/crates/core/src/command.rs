//! Remote-control command grammar.
//!
//! Keywords are case-insensitive and may carry a leading `/` (chat clients
//! add one). Arguments keep their case.
//!
//! ```text
//! capture | unlock | lock | mode1 | mode2 | showpassword
//! adduser_<name>
//! change_<user>_<4 digits>
//! ```

use alloc::string::{String, ToString};
use core::fmt;

use crate::controller::PIN_LEN;

pub const HELP: &str = "commands: capture, unlock, lock, mode1, mode2, showpassword, \
adduser_<name>, change_<user>_<4-digit pin>";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BotCommand {
    Capture,
    Unlock,
    Lock,
    ChangePin { user_id: String, pin: String },
    Mode1,
    Mode2,
    AddUser { name: String },
    ShowPassword,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("unknown command {0:?}; {HELP}")]
    Unknown(String),
    #[error("malformed {command} command: {reason}")]
    Malformed {
        command: &'static str,
        reason: &'static str,
    },
}

/// A user id is nonempty and free of whitespace.
pub fn valid_user_id(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

pub fn valid_pin(s: &str) -> bool {
    s.len() == PIN_LEN && s.bytes().all(|b| b.is_ascii_digit())
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix)
        .then(|| &s[prefix.len()..])
}

pub fn parse_command(text: &str) -> Result<BotCommand, CommandError> {
    let trimmed = text.trim();
    let body = trimmed.strip_prefix('/').unwrap_or(trimmed);

    for (word, cmd) in [
        ("capture", BotCommand::Capture),
        ("unlock", BotCommand::Unlock),
        ("lock", BotCommand::Lock),
        ("mode1", BotCommand::Mode1),
        ("mode2", BotCommand::Mode2),
        ("showpassword", BotCommand::ShowPassword),
    ] {
        if body.eq_ignore_ascii_case(word) {
            return Ok(cmd);
        }
    }

    if let Some(name) = strip_prefix_ci(body, "adduser_") {
        if !valid_user_id(name) {
            return Err(CommandError::Malformed {
                command: "adduser",
                reason: "name must be nonempty with no whitespace",
            });
        }
        return Ok(BotCommand::AddUser { name: name.into() });
    }

    if let Some(args) = strip_prefix_ci(body, "change_") {
        let Some((user, pin)) = args.rsplit_once('_') else {
            return Err(CommandError::Malformed {
                command: "change",
                reason: "expected change_<user>_<pin>",
            });
        };
        if !valid_user_id(user) {
            return Err(CommandError::Malformed {
                command: "change",
                reason: "user must be nonempty with no whitespace",
            });
        }
        if !valid_pin(pin) {
            return Err(CommandError::Malformed {
                command: "change",
                reason: "pin must be exactly 4 digits",
            });
        }
        return Ok(BotCommand::ChangePin {
            user_id: user.into(),
            pin: pin.into(),
        });
    }

    Err(CommandError::Unknown(trimmed.to_string()))
}

impl fmt::Display for BotCommand {
    /// Canonical text; parses back to the same command.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BotCommand::Capture => f.write_str("capture"),
            BotCommand::Unlock => f.write_str("unlock"),
            BotCommand::Lock => f.write_str("lock"),
            BotCommand::ChangePin { user_id, pin } => write!(f, "change_{user_id}_{pin}"),
            BotCommand::Mode1 => f.write_str("mode1"),
            BotCommand::Mode2 => f.write_str("mode2"),
            BotCommand::AddUser { name } => write!(f, "adduser_{name}"),
            BotCommand::ShowPassword => f.write_str("showpassword"),
        }
    }
}

impl BotCommand {
    /// Whether dispatching this command changes door or registry state.
    pub fn mutates(&self) -> bool {
        !matches!(self, BotCommand::Capture | BotCommand::ShowPassword)
    }
}
