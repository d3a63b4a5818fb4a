//! Built-in scenario scripts.

/// Patient with a registered liver image and two requesters. Blocks 1 to 7:
/// create, two requests, grant, deny, both traces, revoke.
pub const FIG4: &str = r#"# access sharing sequence with the reference addresses
0   patient join patient   0x5575805E19b4807974Be0B77Fd9d385D4A0e6d1E
0   ir1     join requestor 0xdD870fA1b7C4700F2BD7f44238821C26f7392148
0   ir2     join requestor 0x583031D1113aD414F02576BD6afaBfb302140225
60  patient create!  "Liver image" QmNaS5gQzoPxr3S2n6T6BsFuVRmMFwpohLVFfAFrU8gyTq
120 ir1     request! patient "Doctor requesting liver image for diagnosis"
180 ir2     request! patient "General practitioner requesting liver image"
240 patient approve! ir1
300 patient deny!    ir2 "Need more detailed information to access my image"
360 patient trace!   patient ir1
360 patient trace!   patient ir2
420 patient remove!  ir1
"#;

/// The first five blocks of [`FIG4`]: one requester approved, one denied.
pub fn approved() -> String {
    FIG4.lines().filter(|l| !l.contains("trace!") && !l.contains("remove!")).collect::<Vec<_>>().join("\n")
}

pub fn by_name(name: &str) -> Option<String> {
    match name {
        "fig4" => Some(FIG4.to_string()),
        "approved" => Some(approved()),
        _ => None,
    }
}

pub const NAMES: [&str; 2] = ["fig4", "approved"];
