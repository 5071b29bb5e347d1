//! SPR gateway and Supplementary Register.

use super::{check, forward, put_blocks, put_link, take_link, Cx, Flow, Halt, Next, OrAbort};
use crate::codec::Reader;
use crate::crypto::{dss_verify, Signature};
use crate::eid::{register_foreign_citizen, Certificate, ForeignCitizenData, IdentityLink, IssuerContext, MOA_ID};
use crate::envelope::{Envelope, MsgType};
use crate::pre::re_decrypt;
use crate::world::{F_IDP, SPR_GW, SR};

/// Checks the foreign certificate and the qualified signature over `challenge`.
fn check_citizen(cx: &Cx<'_>, cert: &Certificate, challenge: &str, qs: &Signature, step: &str) -> Result<(), Halt> {
    let fidp = cx.pk(F_IDP).ok_or_else(|| Halt::abort(step, "unknown foreign IdP"))?;
    check(cert.verify(&fidp), step, "certificate invalid")?;
    check(
        dss_verify(cert.public_key(), challenge.as_bytes(), qs),
        step,
        "qualified signature invalid",
    )
}

/// Steps 13–15a: the gateway forwards the registration request to the SR.
pub(super) fn spr_request(_flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "13";
    let mut reply = cx.envelope("15a", MsgType::SrRegister, SR);
    if cx.cloud() {
        let c = env.re_ct("c_sprgw").or_abort(step)?;
        let sector = env.plain_str("sector").or_abort(step)?.to_owned();
        cx.step("14");
        let c_sr = forward(cx, SR, &c, "14")?;
        reply = reply.re("c_sr", &c_sr).plain("sector", sector);
    } else {
        let cert = Certificate::from_bytes(env.plain_bytes("certificate").or_abort(step)?).or_abort(step)?;
        let challenge = env.meta_str("challenge").or_abort(step)?.to_owned();
        let qs = env.signature_field("qualified_signature").or_abort(step)?;
        check_citizen(cx, &cert, &challenge, &qs, step)?;
        let fc = env.plain_bytes("fc_data").or_abort(step)?.to_vec();
        ForeignCitizenData::from_bytes(&fc).or_abort(step)?;
        reply = reply
            .plain("fc_data", fc)
            .plain("certificate", cert.to_bytes())
            .meta("challenge", challenge)
            .sig("qualified_signature", &qs);
    }
    cx.step("15a");
    cx.send(reply)
}

/// `(fc_data, certificate, challenge, qualified_signature)`.
type Assertion = (Vec<u8>, Vec<u8>, String, Vec<u8>);

fn parse_assertion(bytes: &[u8]) -> Result<Assertion, crate::codec::DecodeError> {
    let mut r = Reader::new(bytes);
    r.expect_tag(b"eid-cloud/stork-assertion/v1")?;
    let fc = r.bytes()?.to_vec();
    let cert = r.bytes()?.to_vec();
    let challenge = r.str()?.to_owned();
    let qs = r.bytes()?.to_vec();
    r.finish()?;
    Ok((fc, cert, challenge, qs))
}

/// Steps 15a/15b–15c: the SR registers the citizen and issues a link.
pub(super) fn sr_register(cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = if cx.cloud() { "15b" } else { "15a" };
    let (fc, cert, challenge, qs) = if cx.cloud() {
        let c = env.re_ct("c_sr").or_abort(step)?;
        let sk = cx
            .ring()
            .re_identities
            .get(SR)
            .cloned()
            .ok_or_else(|| Halt::abort(step, "SR holds no identity key"))?;
        let plain = re_decrypt(&sk, &c).or_abort(step)?;
        let (fc, cert, challenge, qs) = parse_assertion(&plain).or_abort(step)?;
        let cert = Certificate::from_bytes(&cert).or_abort(step)?;
        let qs = Signature::from_bytes(&qs).or_abort(step)?;
        (fc, cert, challenge, qs)
    } else {
        let fc = env.plain_bytes("fc_data").or_abort(step)?.to_vec();
        let cert = Certificate::from_bytes(env.plain_bytes("certificate").or_abort(step)?).or_abort(step)?;
        let challenge = env.meta_str("challenge").or_abort(step)?.to_owned();
        let qs = env.signature_field("qualified_signature").or_abort(step)?;
        (fc, cert, challenge, qs)
    };
    check_citizen(cx, &cert, &challenge, &qs, step)?;
    let data = ForeignCitizenData::from_bytes(&fc).or_abort(step)?;
    check(
        cert.subject() == data.full_name(),
        step,
        "certificate does not match the citizen data",
    )?;

    let ring = cx.ring();
    let issuer = ring
        .issuer
        .clone()
        .ok_or_else(|| Halt::abort(step, "SR holds no issuing key"))?;
    let pin_key = ring
        .pin_key
        .ok_or_else(|| Halt::abort(step, "SR holds no sourcePIN key"))?;
    let reply = cx.envelope("15c", MsgType::SrResponse, SPR_GW);
    let reply = if cx.cloud() {
        let sector = env.plain_str("sector").or_abort(step)?.to_owned();
        let params = cx.world.directory.params(crate::world::SRA).clone();
        let sectors = cx.world.scenario.sectors.clone();
        let ctx = IssuerContext {
            signing: &issuer,
            pin_key: &pin_key,
            re_params: &params,
        };
        let (link, _) = register_foreign_citizen(
            &mut cx.world.registers.sr,
            &ctx,
            &fc,
            &sector,
            &sectors,
            SPR_GW,
            &mut *cx.rng,
        )
        .or_abort(step)?;
        put_link(reply, &link)?
    } else {
        let (row, _) = cx.world.registers.sr.register(&pin_key, &data);
        let il = IdentityLink::issue(
            &issuer.sk,
            &row.name,
            &row.date_of_birth,
            &row.source_pin,
            cert.serial(),
        );
        reply.plain("identity_link", il.to_bytes())
    };
    cx.step("15c");
    cx.send(reply)
}

/// Steps 15c–17: the gateway relays the link to MOA-ID.
pub(super) fn sr_response(_flow: &mut Flow, cx: &mut Cx<'_>, env: &Envelope) -> Result<Next, Halt> {
    let step = "15c";
    let sra_pk = cx.world.sra_pk();
    let reply = cx.envelope("16", MsgType::IlForward, MOA_ID);
    let reply = if cx.cloud() {
        let link = take_link(env).or_abort(step)?;
        check(link.verify(&sra_pk), step, "redactable signature invalid")?;
        cx.step("16");
        let mut blocks = std::collections::BTreeMap::new();
        for (_, b) in link.visible_blocks().or_abort(step)? {
            blocks.insert(b.label, forward(cx, MOA_ID, &b.ciphertext, "16")?);
        }
        put_blocks(reply, &blocks)
    } else {
        let bytes = env.plain_bytes("identity_link").or_abort(step)?.to_vec();
        let il = IdentityLink::from_bytes(&bytes).or_abort(step)?;
        check(il.verify(&sra_pk), step, "Identity Link signature invalid")?;
        cx.step("16");
        reply.plain("identity_link", bytes)
    };
    cx.send(reply)
}
