// Typed client for the gateway HTTP API. Everything the UI knows about the
// backend goes through this module.

export interface Answer {
  readonly doc_id: string;
  readonly answer_text: string | null;
  readonly char_span: readonly [number, number] | null;
  readonly tag: string;
  readonly tag_score: number;
  readonly retriever_score: number;
  readonly qa_score: number;
  readonly combined_score: number;
  readonly rank: number;
}

export interface MessageReply {
  readonly intent: string;
  readonly action: string;
  readonly reply: string;
  readonly selected_rank: number | null;
  readonly answers: readonly Answer[];
}

export interface DocRecord {
  readonly doc_id: string;
  readonly ata_chapter: string;
  readonly applicability: string;
  readonly title: string;
  readonly headers: string;
  readonly body: string;
  readonly norm_body: string;
  readonly offset_map: readonly number[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  async createSession(): Promise<string> {
    const body = await this.request("POST", "/api/sessions");
    return body.session_id as string;
  }

  async sendMessage(sessionId: string, text: string): Promise<MessageReply> {
    const body = await this.request("POST", `/api/sessions/${sessionId}/messages`, { text });
    return body as MessageReply;
  }

  async getDoc(docId: string): Promise<DocRecord> {
    const body = await this.request("GET", `/api/docs/${encodeURIComponent(docId)}`);
    return body as DocRecord;
  }

  private async request(method: string, path: string, payload?: unknown): Promise<any> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: payload === undefined ? undefined : { "content-type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
    let body: any = null;
    try {
      body = await response.json();
    } catch {
      // fall through; non-JSON error bodies become a generic ApiError below
    }
    if (!response.ok) {
      throw new ApiError(
        response.status,
        body?.code ?? `http_${response.status}`,
        body?.message ?? response.statusText,
      );
    }
    return body;
  }
}
