// Bridge message types and codecs. Mirrors schema.json.
export function leadSet(q) {
    if (q.length !== 6) {
        throw new Error(`lead.set needs exactly 6 joints, got ${q.length}`);
    }
    return { t: "lead.set", q: [...q] };
}
export function leadGrip(g) {
    if (!(g >= 0 && g <= 1)) {
        throw new Error(`lead.grip g must be in [0, 1], got ${g}`);
    }
    return { t: "lead.grip", g };
}
export function encode(msg) {
    return JSON.stringify(msg);
}
/** Parse an incoming payload; returns null for junk rather than throwing. */
export function decode(payload) {
    let doc;
    try {
        doc = JSON.parse(payload);
    }
    catch {
        return null;
    }
    if (typeof doc !== "object" || doc === null)
        return null;
    const t = doc.t;
    if (typeof t !== "string")
        return null;
    switch (t) {
        case "view.state": {
            const m = doc;
            if (!Array.isArray(m.joints) || m.joints.length !== 7)
                return null;
            if (typeof m.recorder !== "object" || m.recorder === null)
                return null;
            return m;
        }
        case "view.frame": {
            const m = doc;
            if (!m.images || typeof m.images.base !== "string" ||
                typeof m.images.wrist !== "string")
                return null;
            return m;
        }
        case "hello":
        case "lead.set":
        case "lead.grip":
        case "rec.start":
        case "rec.stop":
        case "error":
            return doc;
        default:
            return null;
    }
}
