"""Primitive relations computed in Python rather than in the expression language.

Power's preserved program order is a least fixpoint of four mutually recursive
relations, which the let-language (deliberately non-recursive) cannot state.
"""

from __future__ import annotations

from ..relalg import Plugin, r_diff, r_inter, r_lift, r_seq, r_union


def _u(*rs):
    out = rs[0]
    for r in rs[1:]:
        out = r_union(out, r)
    return out


def power_ppo(n, R, W, po, po_loc, addr, data, ctrl, isync, fre, rfe, coe, rfi):
    dp = r_union(addr, data)
    rdw = r_inter(po_loc, r_seq(fre, rfe))
    detour = r_inter(po_loc, r_seq(coe, rfe))
    ctrlisync = r_inter(ctrl, isync)
    ii0 = _u(dp, rdw, rfi)
    ci0 = _u(ctrlisync, detour)
    cc0 = _u(dp, po_loc, ctrl, r_seq(addr, po))
    ic0 = (0,) * n
    ii, ic, ci, cc = ii0, ic0, ci0, cc0
    while True:
        nii = _u(ii0, ci, r_seq(ic, ci), r_seq(ii, ii))
        nic = _u(ic0, ii, cc, r_seq(ic, cc), r_seq(ii, ic))
        nci = _u(ci0, r_seq(ci, ii), r_seq(cc, ci))
        ncc = _u(cc0, ci, r_seq(ci, ic), r_seq(cc, cc))
        if (nii, nic, nci, ncc) == (ii, ic, ci, cc):
            break
        ii, ic, ci, cc = nii, nic, nci, ncc
    lr, lw = r_lift(n, R), r_lift(n, W)
    return r_union(r_seq(r_seq(lr, ii), lr), r_seq(r_seq(lr, ic), lw))


PLUGINS = {
    "power_ppo": Plugin(
        "power_ppo",
        ("R", "W", "po", "po_loc", "addr", "data", "ctrl", "isync", "fre", "rfe", "coe", "rfi"),
        power_ppo,
    ),
}
