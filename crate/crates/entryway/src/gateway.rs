//! Remote control over a chat channel: transports, notification rendering
//! and delivery, and command dispatch against a [`Station`].

use std::collections::VecDeque;
use std::fmt;
use std::time::Duration;

use entryway_core::command::{parse_command, BotCommand, CommandError};
use entryway_core::controller::{Event, Millis, Notification};
use entryway_core::{GrayImage, LandmarkSet, Mode};

use crate::station::Station;

#[derive(Debug, Clone, PartialEq)]
pub struct Photo {
    pub name: String,
    pub image: GrayImage,
    /// Landmark boxes sent along with an enrollment photo, if known.
    pub landmarks: Option<LandmarkSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatMessage {
    pub chat_id: String,
    pub text: String,
    pub photo: Option<Photo>,
    pub at: Millis,
}

impl ChatMessage {
    pub fn text(chat_id: &str, text: impl Into<String>, at: Millis) -> ChatMessage {
        ChatMessage {
            chat_id: chat_id.into(),
            text: text.into(),
            photo: None,
            at,
        }
    }
}

impl fmt::Display for ChatMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {:?}", self.at, self.chat_id, self.text)?;
        if let Some(p) = &self.photo {
            write!(f, " +photo {}", p.name)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transport unavailable: {0}")]
pub struct TransportError(pub String);

pub trait Transport {
    fn send(&mut self, msg: &ChatMessage) -> Result<(), TransportError>;
    /// Inbound messages received since the last poll, oldest first.
    fn poll(&mut self) -> Result<Vec<ChatMessage>, TransportError>;
}

/// Writes outgoing messages to the log; nothing ever arrives.
#[derive(Debug, Default)]
pub struct LogTransport;

impl Transport for LogTransport {
    fn send(&mut self, msg: &ChatMessage) -> Result<(), TransportError> {
        log::info!("{msg}");
        Ok(())
    }

    fn poll(&mut self) -> Result<Vec<ChatMessage>, TransportError> {
        Ok(Vec::new())
    }
}

/// FIFO queues in both directions, with injectable send failures.
#[derive(Debug, Default)]
pub struct InMemoryTransport {
    inbound: VecDeque<ChatMessage>,
    sent: Vec<ChatMessage>,
    fail_sends: usize,
    attempts: usize,
}

impl InMemoryTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_inbound(&mut self, msg: ChatMessage) {
        self.inbound.push_back(msg);
    }

    /// The next `n` send attempts fail.
    pub fn fail_next_sends(&mut self, n: usize) {
        self.fail_sends = n;
    }

    pub fn sent(&self) -> &[ChatMessage] {
        &self.sent
    }

    pub fn send_attempts(&self) -> usize {
        self.attempts
    }
}

impl Transport for InMemoryTransport {
    fn send(&mut self, msg: &ChatMessage) -> Result<(), TransportError> {
        self.attempts += 1;
        if self.fail_sends > 0 {
            self.fail_sends -= 1;
            return Err(TransportError("injected failure".into()));
        }
        self.sent.push(msg.clone());
        Ok(())
    }

    fn poll(&mut self) -> Result<Vec<ChatMessage>, TransportError> {
        Ok(self.inbound.drain(..).collect())
    }
}

/// Chat text for a notification; the photo, if any, is attached separately.
pub fn notification_text(n: &Notification) -> String {
    match n {
        Notification::UnknownUser { at, .. } => {
            format!("Unknown user at the door ({at}). Reply adduser_<name> to register them.")
        }
        Notification::DoorUnlocked { user_id, at } => {
            format!("{user_id} unlocked the door ({at}).")
        }
        Notification::EnrollmentDone { user_id, frames } => {
            format!("Enrollment of {user_id} finished with {frames} frames.")
        }
        Notification::CommandAck { text } => text.clone(),
    }
}

/// The photo a notification should carry, by photo-store name.
pub fn notification_photo(n: &Notification) -> Option<&str> {
    match n {
        Notification::UnknownUser { photo, .. } => Some(photo),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first failed attempt.
    pub retries: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeliveryReport {
    pub sent: usize,
    pub dropped: Vec<ChatMessage>,
}

/// Sends each message in order, retrying with doubling backoff. A message
/// that still fails is logged and dropped; later messages are still tried.
pub fn deliver(
    batch: Vec<ChatMessage>,
    transport: &mut dyn Transport,
    policy: &RetryPolicy,
    sleep: &mut dyn FnMut(Duration),
) -> DeliveryReport {
    let mut report = DeliveryReport::default();
    for msg in batch {
        let mut wait = policy.backoff;
        let mut attempt = 0;
        loop {
            match transport.send(&msg) {
                Ok(()) => {
                    report.sent += 1;
                    break;
                }
                Err(e) if attempt < policy.retries => {
                    log::debug!("send failed ({e}), retrying in {wait:?}");
                    sleep(wait);
                    wait *= 2;
                    attempt += 1;
                }
                Err(e) => {
                    log::warn!(
                        "dropping notification after {} attempts: {e}: {msg}",
                        attempt + 1
                    );
                    report.dropped.push(msg);
                    break;
                }
            }
        }
    }
    report
}

/// Bounded notification queue between the door logic and the transport.
/// When full, the newest notification is dropped so the door never waits.
#[derive(Debug, Clone)]
pub struct Outbox {
    queue: VecDeque<(Millis, Notification)>,
    capacity: usize,
    dropped: u64,
}

impl Outbox {
    pub fn new(capacity: usize) -> Self {
        Self {
            queue: VecDeque::new(),
            capacity: capacity.max(1),
            dropped: 0,
        }
    }

    pub fn push(&mut self, at: Millis, n: Notification) -> bool {
        if self.queue.len() >= self.capacity {
            self.dropped += 1;
            log::warn!("notification queue full, dropping {n}");
            return false;
        }
        self.queue.push_back((at, n));
        true
    }

    pub fn drain(&mut self) -> Vec<(Millis, Notification)> {
        self.queue.drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub reply: ChatMessage,
    pub command: Option<BotCommand>,
    /// Whether door or registry state was touched.
    pub mutated: bool,
}

pub const REFUSAL: &str = "Not authorised.";

/// Handles one inbound chat message. Only the station's admin chat may
/// issue commands or send enrollment photos; anyone else gets a refusal
/// and nothing else happens.
pub fn dispatch(station: &mut Station, msg: &ChatMessage) -> Dispatch {
    let now = station.now();
    let reply = |text: String| ChatMessage::text(&msg.chat_id, text, now);
    if msg.chat_id != station.admin_chat_id() {
        log::info!("refused message from chat {}", msg.chat_id);
        return Dispatch {
            reply: reply(REFUSAL.into()),
            command: None,
            mutated: false,
        };
    }
    if let Some(photo) = &msg.photo {
        let (text, mutated) = match station.enroll_photo(&photo.image, photo.landmarks.as_ref()) {
            Ok(text) => (text, true),
            Err(e) => (e.to_string(), false),
        };
        return Dispatch {
            reply: reply(text),
            command: None,
            mutated,
        };
    }
    let command = match parse_command(&msg.text) {
        Ok(c) => c,
        Err(e @ (CommandError::Unknown(_) | CommandError::Malformed { .. })) => {
            return Dispatch {
                reply: reply(e.to_string()),
                command: None,
                mutated: false,
            }
        }
    };
    let (reply_msg, mutated) = match &command {
        BotCommand::Unlock => {
            station.admin(Event::AdminUnlock);
            (reply("Door unlocked.".into()), true)
        }
        BotCommand::Lock => {
            station.admin(Event::AdminLock);
            (reply("Door locked.".into()), true)
        }
        BotCommand::Mode1 | BotCommand::Mode2 => {
            let mode = if command == BotCommand::Mode1 {
                Mode::FullFace
            } else {
                Mode::Occluded
            };
            station.admin(Event::AdminSetMode { mode });
            (reply(format!("Recognition mode: {mode}.")), true)
        }
        BotCommand::AddUser { name } => match station.add_user(name) {
            Ok(text) => (reply(text), true),
            Err(e) => (reply(e.to_string()), false),
        },
        BotCommand::ChangePin { user_id, pin } => {
            match station.registry_mut().set_pin(user_id, pin) {
                Ok(()) => (reply(format!("PIN for {user_id} updated.")), true),
                Err(e) => (reply(e.to_string()), false),
            }
        }
        BotCommand::ShowPassword => {
            let lines: Vec<String> = station
                .registry()
                .users()
                .map(|u| format!("{}:{}", u.user_id, u.pin.as_deref().unwrap_or("(unset)")))
                .collect();
            let text = if lines.is_empty() {
                "No users registered.".to_string()
            } else {
                lines.join("\n")
            };
            (reply(text), false)
        }
        BotCommand::Capture => match station.capture_photo() {
            Some((name, image)) => (
                ChatMessage {
                    photo: Some(Photo {
                        name: name.clone(),
                        image,
                        landmarks: None,
                    }),
                    ..reply(format!("Door camera snapshot {name}"))
                },
                false,
            ),
            None => (reply("No camera frame available.".into()), false),
        },
    };
    Dispatch {
        reply: reply_msg,
        command: Some(command),
        mutated,
    }
}

/// Wire shapes for a long-polling bot HTTP API (`getUpdates` with an offset,
/// `sendMessage` / `sendPhoto`). Only the JSON mapping lives here; the HTTP
/// client is left to the deployment.
pub mod bot_api {
    use serde_json::{json, Value};

    use super::ChatMessage;
    use entryway_core::controller::Millis;

    pub fn get_updates_query(offset: i64, timeout_s: u32) -> String {
        format!("getUpdates?offset={offset}&timeout={timeout_s}")
    }

    /// Text messages in an update batch, and the offset for the next poll
    /// (one past the highest update id seen).
    pub fn parse_updates(body: &Value, offset: i64, now: Millis) -> (Vec<ChatMessage>, i64) {
        let mut next = offset;
        let mut out = Vec::new();
        for update in body["result"].as_array().into_iter().flatten() {
            if let Some(id) = update["update_id"].as_i64() {
                next = next.max(id + 1);
            }
            let msg = &update["message"];
            let chat = &msg["chat"]["id"];
            let chat_id = chat
                .as_i64()
                .map(|i| i.to_string())
                .or_else(|| chat.as_str().map(String::from));
            if let (Some(chat_id), Some(text)) = (chat_id, msg["text"].as_str()) {
                out.push(ChatMessage::text(&chat_id, text, now));
            }
        }
        (out, next)
    }

    /// `sendMessage` body for text, or the non-file fields of a multipart
    /// `sendPhoto` upload when the message carries a photo.
    pub fn send_body(msg: &ChatMessage) -> (&'static str, Value) {
        match &msg.photo {
            Some(p) => (
                "sendPhoto",
                json!({ "chat_id": msg.chat_id, "caption": msg.text, "filename": p.name }),
            ),
            None => (
                "sendMessage",
                json!({ "chat_id": msg.chat_id, "text": msg.text }),
            ),
        }
    }
}
