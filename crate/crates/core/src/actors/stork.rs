//! PEPS and the foreign identity provider.

use rand::RngCore;

use super::moa::{assertion_bytes, check_qualified};
use super::{check, forward, Cx, Flow, Halt, Next, OrAbort};
use crate::eid::MOA_ID;
use crate::envelope::{Envelope, MsgType};
use crate::pre::re_encrypt;
use crate::world::{EC, F_IDP, PEPS};

/// Step 5 → 6: PEPS forwards the request to the citizen's home country.
pub(super) fn stork_request(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "5";
    let request_id = env.meta_str("request_id").or_abort(step)?.to_owned();
    let attributes = env.meta_str("attributes").or_abort(step)?.to_owned();
    cx.step("6");
    let reply = cx
        .envelope("6", MsgType::StorkForward, F_IDP)
        .meta("request_id", request_id)
        .meta("attributes", attributes);
    cx.send(reply)
}

/// Step 6 → 7: the F-IdP challenges the citizen.
pub(super) fn stork_forward(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    env.meta_str("attributes").or_abort("6")?;
    let mut nonce = [0u8; 16];
    cx.rng.fill_bytes(&mut nonce);
    let challenge = hex::encode(nonce);
    flow.foreign.challenge = challenge.clone().into_bytes();
    cx.step("7");
    let subject = cx.spec.subject.clone();
    let reply = cx
        .envelope("7", MsgType::QsRequest, &subject)
        .meta("challenge", challenge);
    cx.send(reply)
}

/// Steps 8–9: the F-IdP authenticates the citizen and answers PEPS.
pub(super) fn qs_response(flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "8";
    let cert = crate::eid::Certificate::from_bytes(env.plain_bytes("certificate").or_abort(step)?)
        .or_abort(step)?;
    let qs = env.signature_field("qualified_signature").or_abort(step)?;
    let own = cx.ring().signing.pk;
    check(
        cert.verify(&own)
            && crate::crypto::dss_verify(cert.public_key(), &flow.foreign.challenge, &qs),
        step,
        "authentication failed",
    )?;
    let data = cx
        .world
        .registers
        .fidp
        .citizens
        .get(&cx.spec.subject)
        .cloned()
        .ok_or_else(|| Halt::abort(step, "citizen unknown to the identity provider"))?;
    let challenge = String::from_utf8(flow.foreign.challenge.clone()).or_abort(step)?;
    cx.step("9");
    let reply = cx.envelope("9", MsgType::IdpResponse, PEPS);
    let reply = if cx.cloud() {
        let payload = assertion_bytes(&data.to_bytes(), &cert.to_bytes(), &challenge, &qs.to_bytes());
        let params = cx.world.directory.params(EC).clone();
        let c = re_encrypt(&params, PEPS, &payload, &mut *cx.rng).or_abort("9")?;
        reply.re("c_peps", &c)
    } else {
        reply
            .plain("given_name", data.given_name)
            .plain("family_name", data.family_name)
            .plain("date_of_birth", data.date_of_birth)
            .plain("identifier", data.identifier)
            .plain("certificate", cert.to_bytes())
            .meta("challenge", challenge)
            .sig("qualified_signature", &qs)
    };
    cx.send(reply)
}

/// Steps 9–10: PEPS relays the assertion to MOA-ID.
pub(super) fn idp_response(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "9";
    let mut reply = cx.envelope("10", MsgType::StorkResponse, MOA_ID);
    if cx.cloud() {
        let c = env.re_ct("c_peps").or_abort(step)?;
        cx.step("10");
        let c_moa = forward(cx, MOA_ID, &c, "10")?;
        reply = reply.re("c_moa", &c_moa);
    } else {
        let (cert, challenge) = check_qualified(cx, env, step)?;
        for f in ["given_name", "family_name", "date_of_birth", "identifier"] {
            reply = reply.plain(f, env.plain_bytes(f).or_abort(step)?.to_vec());
        }
        let qs = env.signature_field("qualified_signature").or_abort(step)?;
        cx.step("10");
        reply = reply
            .plain("certificate", cert.to_bytes())
            .meta("challenge", challenge)
            .sig("qualified_signature", &qs);
    }
    cx.send(reply)
}
