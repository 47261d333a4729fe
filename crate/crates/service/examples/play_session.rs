//! Start the play server in-process and drive one session with a bot client
//! over the websocket protocol.
//!
//! ```text
//! cargo run --release -p hipt-service --example play_session -- [data_dir]
//! ```

use futures_util::{SinkExt, StreamExt};
use hipt_core::env::bundled_layout;
use hipt_service::config::ServeSettings;
use hipt_service::protocol::ServerMessage;
use hipt_service::server::{serve, ServerState};
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let data_dir =
        std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("hipt-play").display().to_string());
    let settings = ServeSettings {
        data_dir: data_dir.clone().into(),
        tick_ms: 5,
        horizon: 100,
        rounds: 2,
        between_episodes_ms: 50,
        agents: vec!["scripted".into(), "random".into(), "stay".into()],
        ..ServeSettings::default()
    };
    let state = ServerState::new(settings, bundled_layout("cramped_room").unwrap())?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    tokio::spawn(serve(state, listener));

    let (mut ws, _) = connect_async(format!("ws://{addr}/ws")).await?;
    ws.send(Message::Text(r#"{"type":"join","session":"demo"}"#.into())).await?;
    let moves = ["north", "east", "interact", "south", "west", "interact"];
    let mut k = 0;
    while let Some(frame) = ws.next().await {
        let Message::Text(text) = frame? else { continue };
        match serde_json::from_str::<ServerMessage>(&text)? {
            ServerMessage::Hello { layout, grid, seat, .. } => println!("joined {layout} as seat {seat}\n{grid}"),
            ServerMessage::State { tick, partner, round, episode, .. } => {
                if tick == 0 {
                    println!("round {round} episode {episode} with {partner}");
                }
                // A human would press keys; the bot cycles through a few.
                if tick % 3 == 0 {
                    let msg = format!(r#"{{"type":"input","action":"{}"}}"#, moves[k % moves.len()]);
                    ws.send(Message::Text(msg.into())).await?;
                    k += 1;
                }
            }
            ServerMessage::RoundEnd { round, scores } => println!("round {round} scores {scores:?}"),
            ServerMessage::PromptPreference { round, labels } => {
                let choice = if round % 2 == 0 { -1 } else { 1 };
                println!("preferring {}", labels[if choice < 0 { 0 } else { 1 }]);
                ws.send(Message::Text(format!(r#"{{"type":"preference","choice":{choice}}}"#).into())).await?;
            }
            ServerMessage::Done {} => {
                println!("session done");
                break;
            }
            ServerMessage::Error { message } => println!("server: {message}"),
        }
    }
    let prefs = std::path::Path::new(&data_dir).join("sessions/demo/preferences.jsonl");
    println!("{}", std::fs::read_to_string(&prefs)?);
    Ok(())
}
