// Single-page UI for conversational feature transformation.
// All state lives server-side; the page keeps only the session id (in
// the URL hash) and rebuilds the whole view from GET /sessions/{id}.

import {
    ApiClient,
    ApiError,
    ColumnInfo,
    ProposalView,
    SessionSnapshot,
    substituteNames,
} from "./api.js";

const api = new ApiClient("");

let columnNames: string[] = [];
let busy = false;

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

function sessionId(): string | null {
    const hash = window.location.hash.replace(/^#/, "");
    return hash || null;
}

function setBusy(value: boolean): void {
    busy = value;
    document.querySelectorAll("button").forEach((b) => {
        (b as HTMLButtonElement).disabled = value;
    });
}

function showError(message: string): void {
    const box = el<HTMLDivElement>("error");
    box.textContent = message;
    box.hidden = !message;
}

async function guard(action: () => Promise<void>): Promise<void> {
    if (busy) return;
    setBusy(true);
    showError("");
    try {
        await action();
    } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
            showError("resolve pending proposal first");
        } else {
            showError(err instanceof Error ? err.message : String(err));
        }
    } finally {
        setBusy(false);
    }
}

function renderColumns(columns: ColumnInfo[]): void {
    columnNames = columns.map((c) => c.name);
    const list = el<HTMLUListElement>("columns");
    list.innerHTML = "";
    for (const col of columns) {
        const item = document.createElement("li");
        const badge = document.createElement("span");
        badge.className = `badge ${col.origin}`;
        badge.textContent = col.origin;
        item.appendChild(badge);
        item.appendChild(document.createTextNode(` ${col.name}`));
        if (col.expression) {
            const expr = document.createElement("code");
            expr.textContent = ` = ${col.expression}`;
            item.appendChild(expr);
        }
        list.appendChild(item);
    }
}

function renderChatLog(entries: SessionSnapshot["chat_log"]): void {
    const log = el<HTMLDivElement>("chat-log");
    log.innerHTML = "";
    for (const entry of entries) {
        const line = document.createElement("div");
        line.className = `chat ${entry.role}`;
        line.textContent = `${entry.role}: ${describeEntry(entry)}`;
        log.appendChild(line);
    }
    log.scrollTop = log.scrollHeight;
}

function describeEntry(entry: Record<string, unknown>): string {
    if (typeof entry.text === "string") return entry.text;
    if (entry.proposal) {
        const p = entry.proposal as ProposalView;
        return `proposed ${p.expressions.join(", ")}`;
    }
    if (Array.isArray(entry.accepted)) return `accepted ${entry.accepted.join(", ") || "none"}`;
    if (entry.advice) {
        const a = entry.advice as { semantic: string[]; distribution: string[] };
        return [...a.semantic, ...a.distribution].join("; ");
    }
    if (Array.isArray(entry.auto_rounds)) return `ran ${entry.auto_rounds.length} auto round(s)`;
    return JSON.stringify(entry);
}

function renderProposal(proposal: ProposalView | null): void {
    const panel = el<HTMLDivElement>("proposal");
    panel.innerHTML = "";
    panel.hidden = proposal === null;
    el<HTMLDivElement>("proposal-actions").hidden = proposal === null;
    if (!proposal) return;
    proposal.expressions.forEach((raw, i) => {
        const card = document.createElement("div");
        card.className = "card";
        const check = document.createElement("input");
        check.type = "checkbox";
        check.checked = true;
        check.dataset.index = String(i);
        card.appendChild(check);

        const title = document.createElement("div");
        title.innerHTML = `<code>${raw}</code><br><em>${substituteNames(raw, columnNames)}</em>`;
        card.appendChild(title);

        const stats = proposal.preview[i];
        if (stats) {
            const detail = document.createElement("small");
            detail.textContent =
                `mean ${Number(stats.mean).toPrecision(4)}, std ${Number(stats.std).toPrecision(4)}, ` +
                `skew ${Number(stats.skewness).toPrecision(4)}, nan ${Number(stats.nan_fraction).toPrecision(4)}`;
            card.appendChild(detail);
        }
        panel.appendChild(card);
    });
}

async function refresh(): Promise<void> {
    const id = sessionId();
    if (!id) return;
    const snapshot = await api.getSession(id);
    el<HTMLDivElement>("workspace").hidden = false;
    renderColumns(snapshot.columns);
    renderChatLog(snapshot.chat_log);
    renderProposal(snapshot.pending_proposal);
    el<HTMLSpanElement>("history-depth").textContent = String(snapshot.history_depth);
}

function selectedIndices(): number[] {
    const boxes = el<HTMLDivElement>("proposal").querySelectorAll("input[type=checkbox]");
    const indices: number[] = [];
    boxes.forEach((box) => {
        const input = box as HTMLInputElement;
        if (input.checked) indices.push(Number(input.dataset.index));
    });
    return indices;
}

function wire(): void {
    el<HTMLFormElement>("upload-form").addEventListener("submit", (event) => {
        event.preventDefault();
        const csv = el<HTMLInputElement>("csv-file").files?.[0];
        const meta = el<HTMLInputElement>("meta-file").files?.[0];
        if (!csv || !meta) {
            showError("select both a CSV file and its metadata JSON");
            return;
        }
        void guard(async () => {
            const created = await api.createSession(csv, meta);
            window.location.hash = created.session_id;
            await refresh();
        });
    });

    el<HTMLFormElement>("instruct-form").addEventListener("submit", (event) => {
        event.preventDefault();
        const input = el<HTMLInputElement>("instruction");
        const text = input.value.trim();
        if (!text) return;
        void guard(async () => {
            await api.instruct(sessionId()!, text);
            input.value = "";
            await refresh();
        });
    });

    el<HTMLButtonElement>("accept-selected").addEventListener("click", () => {
        void guard(async () => {
            await api.accept(sessionId()!, selectedIndices());
            await refresh();
        });
    });

    el<HTMLButtonElement>("discard").addEventListener("click", () => {
        void guard(async () => {
            await api.accept(sessionId()!, []);
            await refresh();
        });
    });

    el<HTMLButtonElement>("undo").addEventListener("click", () => {
        void guard(async () => {
            await api.undo(sessionId()!);
            await refresh();
        });
    });

    el<HTMLButtonElement>("diagnose").addEventListener("click", () => {
        void guard(async () => {
            await api.diagnose(sessionId()!);
            await refresh();
        });
    });

    el<HTMLButtonElement>("auto-rounds").addEventListener("click", () => {
        void guard(async () => {
            await api.auto(sessionId()!, 2);
            await refresh();
        });
    });

    el<HTMLButtonElement>("export").addEventListener("click", () => {
        void guard(async () => {
            const csv = await api.exportCsv(sessionId()!);
            const blob = new Blob([csv], { type: "text/csv" });
            const link = document.createElement("a");
            link.href = URL.createObjectURL(blob);
            link.download = "transformed.csv";
            link.click();
            URL.revokeObjectURL(link.href);
        });
    });

    window.addEventListener("hashchange", () => void guard(refresh));
}

wire();
if (sessionId()) void guard(refresh);
