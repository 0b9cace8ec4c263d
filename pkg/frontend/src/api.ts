// Typed client for the feature-transformation session API.
// The service is the single source of truth; this module only moves
// JSON back and forth and substitutes feature names for display.

export interface ColumnInfo {
    name: string;
    origin: "original" | "generated";
    expression: string | null;
}

export interface FeatureStats {
    name: string;
    mean: number;
    std: number;
    skewness: number;
    nan_fraction: number;
    [key: string]: unknown;
}

export interface ProposalView {
    expressions: string[];
    preview: FeatureStats[];
}

export interface CreateResponse {
    session_id: string;
    columns: ColumnInfo[];
    stats: Record<string, unknown>;
}

export interface ChatEntry {
    role: string;
    [key: string]: unknown;
}

export interface SessionSnapshot extends CreateResponse {
    pending_proposal: ProposalView | null;
    history_depth: number;
    chat_log: ChatEntry[];
}

export interface AcceptResponse {
    accepted: string[];
    rejections: { expression: string; reason: string }[];
    columns: ColumnInfo[];
}

export interface AutoResponse {
    iterations: Record<string, unknown>[];
    columns: ColumnInfo[];
}

export interface DiagnoseResponse {
    semantic: string[];
    distribution: string[];
}

export class ApiError extends Error {
    constructor(readonly code: string, message: string, readonly status: number) {
        super(message);
    }
}

async function unwrap<T>(response: Response): Promise<T> {
    if (!response.ok) {
        let code = "BACKEND_FAILED";
        let message = response.statusText;
        try {
            const body = await response.json();
            code = body.code ?? code;
            message = body.message ?? message;
        } catch {
            // non-JSON error body; keep the status text
        }
        throw new ApiError(code, message, response.status);
    }
    return response.json() as Promise<T>;
}

export class ApiClient {
    constructor(readonly baseUrl: string = "") {}

    private url(path: string): string {
        return this.baseUrl + path;
    }

    private post<T>(path: string, body?: unknown, token?: string): Promise<T> {
        const headers: Record<string, string> = {};
        if (body !== undefined) headers["Content-Type"] = "application/json";
        if (token) headers["X-Request-Token"] = token;
        return fetch(this.url(path), {
            method: "POST",
            headers,
            body: body === undefined ? undefined : JSON.stringify(body),
        }).then((r) => unwrap<T>(r));
    }

    async createSession(csv: Blob, meta: Blob): Promise<CreateResponse> {
        const form = new FormData();
        form.append("csv", csv, "data.csv");
        form.append("meta", meta, "meta.json");
        const response = await fetch(this.url("/sessions"), { method: "POST", body: form });
        return unwrap<CreateResponse>(response);
    }

    async getSession(id: string): Promise<SessionSnapshot> {
        return unwrap<SessionSnapshot>(await fetch(this.url(`/sessions/${id}`)));
    }

    instruct(id: string, text: string, token?: string): Promise<ProposalView> {
        return this.post(`/sessions/${id}/instruct`, { text }, token);
    }

    accept(id: string, indices: number[], token?: string): Promise<AcceptResponse> {
        return this.post(`/sessions/${id}/accept`, { indices }, token);
    }

    undo(id: string): Promise<{ undone: boolean; columns: ColumnInfo[] }> {
        return this.post(`/sessions/${id}/undo`);
    }

    auto(id: string, iterations: number): Promise<AutoResponse> {
        return this.post(`/sessions/${id}/auto`, { iterations });
    }

    diagnose(id: string): Promise<DiagnoseResponse> {
        return this.post(`/sessions/${id}/diagnose`);
    }

    async exportCsv(id: string): Promise<string> {
        const response = await fetch(this.url(`/sessions/${id}/export`));
        if (!response.ok) throw new ApiError("NOT_FOUND", "export failed", response.status);
        return response.text();
    }

    async deleteSession(id: string): Promise<void> {
        const response = await fetch(this.url(`/sessions/${id}`), { method: "DELETE" });
        if (!response.ok && response.status !== 204) {
            throw new ApiError("NOT_FOUND", "delete failed", response.status);
        }
    }
}

// Replace f<k> tokens with the k-th column name for the human-readable
// view. Purely cosmetic; the raw form stays the canonical rendering.
export function substituteNames(expression: string, names: string[]): string {
    return expression.replace(/\bf(\d+)\b/g, (match, digits: string) => {
        const index = parseInt(digits, 10) - 1;
        return index >= 0 && index < names.length ? names[index] : match;
    });
}
