use thiserror::Error;

use super::types::{Body, MemberId};

pub const QUIT_COMMAND: &str = "/quit";
pub const MEMBER_DETAILS_COMMAND: &str = "/memberdetails";

/// What a line typed by a person asks for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientCommand {
    Broadcast(Body),
    Private { target: MemberId, body: Body },
    DetailsRequest(MemberId),
    Quit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("nothing to send")]
    EmptyInput,
    #[error("'@' must be followed by a valid member id")]
    BadTarget,
    #[error("private message has no text")]
    MissingBody,
    #[error("input spans more than one line")]
    EmbeddedNewline,
}

impl InputError {
    pub fn code(self) -> &'static str {
        match self {
            InputError::EmptyInput => "empty_input",
            InputError::BadTarget => "bad_target",
            InputError::MissingBody => "missing_body",
            InputError::EmbeddedNewline => "embedded_newline",
        }
    }
}

/// Classifies one line of human input.
///
/// * `/quit` quits.
/// * `@<id> /memberdetails` (exactly) asks `<id>` for the member roster.
/// * `@<id> <text>` is a private message.
/// * anything else is a broadcast.
///
/// Surrounding whitespace is ignored.
pub fn parse_user_input(text: &str) -> Result<ClientCommand, InputError> {
    let text = text.trim();
    if text.contains(['\n', '\r']) {
        return Err(InputError::EmbeddedNewline);
    }
    if text.is_empty() {
        return Err(InputError::EmptyInput);
    }
    if text == QUIT_COMMAND {
        return Ok(ClientCommand::Quit);
    }
    let Some(addressed) = text.strip_prefix('@') else {
        return Ok(ClientCommand::Broadcast(body(text)));
    };
    let (raw_target, rest) = addressed.split_once(char::is_whitespace).unwrap_or((addressed, ""));
    let target = MemberId::new(raw_target).map_err(|_| InputError::BadTarget)?;
    let rest = rest.trim_start();
    if rest == MEMBER_DETAILS_COMMAND {
        Ok(ClientCommand::DetailsRequest(target))
    } else if rest.is_empty() {
        Err(InputError::MissingBody)
    } else {
        Ok(ClientCommand::Private { target, body: body(rest) })
    }
}

fn body(text: &str) -> Body {
    Body::new(text).expect("trimmed, non-empty and single-line")
}
