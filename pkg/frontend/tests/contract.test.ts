// UI contract flow against a real service process: upload the bundled
// sample, instruct for variants of f3, accept the first proposal, and
// export. The client-side export must equal the service-side export
// byte for byte and add exactly one column referencing f3.

import { ChildProcess, spawn } from "node:child_process";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError, substituteNames } from "../src/api.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");

let server: ChildProcess;
const api = new ApiClient(BASE);

async function waitForServer(timeoutMs = 20000): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
        try {
            const response = await fetch(`${BASE}/sessions/probe`);
            if (response.status === 404) return;
        } catch {
            // not listening yet
        }
        await new Promise((resolve) => setTimeout(resolve, 200));
    }
    throw new Error("service did not start in time");
}

function sampleBlobs(): { csv: Blob; meta: Blob } {
    const csv = readFileSync(join(REPO_ROOT, "data", "sample", "sample.csv"));
    const meta = readFileSync(join(REPO_ROOT, "data", "sample", "sample.meta.json"));
    return {
        csv: new Blob([csv], { type: "text/csv" }),
        meta: new Blob([meta], { type: "application/json" }),
    };
}

beforeAll(async () => {
    server = spawn(
        "python3",
        ["-m", "duetfe.cli", "serve", "--port", String(PORT), "--backend", "heuristic"],
        { cwd: REPO_ROOT, stdio: "ignore" },
    );
    await waitForServer();
}, 30000);

afterAll(() => {
    server.kill();
});

describe("session API contract", () => {
    it("uploads, instructs, accepts, and exports", async () => {
        const { csv, meta } = sampleBlobs();
        const created = await api.createSession(csv, meta);
        expect(created.columns.length).toBe(4);
        expect(created.columns.every((c) => c.origin === "original")).toBe(true);
        const originalNames = created.columns.map((c) => c.name);

        const proposal = await api.instruct(
            created.session_id,
            "Feature f3 is interesting. Please generate new variants of f3.",
        );
        expect(proposal.expressions.length).toBeGreaterThan(0);
        expect(proposal.preview.length).toBe(proposal.expressions.length);
        for (const expr of proposal.expressions) {
            expect(expr).toMatch(/\bf3\b/);
            expect(substituteNames(expr, originalNames)).toContain(originalNames[2]);
        }

        const accepted = await api.accept(created.session_id, [0]);
        expect(accepted.accepted.length).toBe(1);
        expect(accepted.columns.length).toBe(5);

        const exported = await api.exportCsv(created.session_id);
        const again = await api.exportCsv(created.session_id);
        expect(exported).toBe(again); // byte-identical service-side export

        const header = exported.split("\n")[0].split(",");
        expect(header.length).toBe(5);
        const added = header.filter((name) => /\bf3\b/.test(name));
        expect(added.length).toBe(1); // exactly one added column referencing f3
    });

    it("reconstructs an identical view from the snapshot alone", async () => {
        const { csv, meta } = sampleBlobs();
        const created = await api.createSession(csv, meta);
        await api.instruct(created.session_id, "variants of f2 please");
        const first = await api.getSession(created.session_id);
        const reload = await api.getSession(created.session_id);
        expect(reload.columns).toEqual(first.columns);
        expect(reload.pending_proposal).toEqual(first.pending_proposal);
        expect(reload.chat_log).toEqual(first.chat_log);
    });

    it("surfaces API errors with their service codes", async () => {
        await expect(api.getSession("nope")).rejects.toMatchObject({
            code: "NOT_FOUND",
            status: 404,
        });
        const { csv, meta } = sampleBlobs();
        const created = await api.createSession(csv, meta);
        await api.instruct(created.session_id, "variants of f1");
        try {
            await api.instruct(created.session_id, "another one");
            expect.unreachable("second instruct should conflict");
        } catch (err) {
            expect(err).toBeInstanceOf(ApiError);
            expect((err as ApiError).status).toBe(409);
        }
    });

    it("discard and undo leave the table unchanged", async () => {
        const { csv, meta } = sampleBlobs();
        const created = await api.createSession(csv, meta);
        const before = await api.exportCsv(created.session_id);

        await api.instruct(created.session_id, "variants of f1");
        await api.accept(created.session_id, []); // discard
        expect(await api.exportCsv(created.session_id)).toBe(before);

        await api.instruct(created.session_id, "variants of f1");
        await api.accept(created.session_id, [0]);
        expect(await api.exportCsv(created.session_id)).not.toBe(before);
        const undone = await api.undo(created.session_id);
        expect(undone.undone).toBe(true);
        expect(await api.exportCsv(created.session_id)).toBe(before);
    });
});
