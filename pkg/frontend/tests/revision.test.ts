import { describe, expect, it } from "vitest";

import {
  editorSeed,
  isUnmodified,
  parseRevision,
  serializeDialogue,
  validateDialogue,
} from "../src/revision.js";
import { itemPayload, validDialogue } from "./helpers.js";

describe("editor round-trip", () => {
  it("re-serializes an untouched editor byte-for-byte", () => {
    const item = itemPayload();
    const seed = editorSeed(item);
    const parsed = JSON.parse(seed);
    expect(serializeDialogue(parsed)).toBe(seed);
  });

  it("round-trips through parseRevision without any change", () => {
    const seed = editorSeed(itemPayload());
    const parsed = parseRevision(seed);
    expect(parsed.ok).toBe(true);
    if (parsed.ok) {
      expect(serializeDialogue(parsed.value)).toBe(seed);
      expect(parsed.value).toEqual(validDialogue());
    }
  });

  it("seeds from the pending revision when one exists", () => {
    const revision = validDialogue("d00042");
    revision.turns[0]!.content = "Book a sync with Dana on Friday.";
    const item = itemPayload({ revision });
    expect(editorSeed(item)).toBe(serializeDialogue(revision));
    expect(editorSeed(item)).not.toBe(serializeDialogue(item.dialogue));
  });

  it("detects modification by byte comparison", () => {
    const item = itemPayload();
    const seed = editorSeed(item);
    expect(isUnmodified(seed, item)).toBe(true);
    expect(isUnmodified(seed + "\n", item)).toBe(false);
    expect(isUnmodified(seed.replace("14:00", "15:00"), item)).toBe(false);
  });
});

describe("parseRevision", () => {
  it("rejects malformed JSON without throwing", () => {
    const parsed = parseRevision("{ not json");
    expect(parsed.ok).toBe(false);
    if (!parsed.ok) {
      expect(parsed.problems).toHaveLength(1);
      expect(parsed.problems[0]).toMatch(/^not valid JSON: /);
    }
  });

  it("rejects JSON that is not a dialogue object", () => {
    for (const text of ["[1, 2]", '"hello"', "42", "null"]) {
      const parsed = parseRevision(text);
      expect(parsed.ok).toBe(false);
      if (!parsed.ok) {
        expect(parsed.problems).toEqual(["revision must be a JSON object"]);
      }
    }
  });

  it("accepts a dialogue the service would accept", () => {
    expect(parseRevision(serializeDialogue(validDialogue())).ok).toBe(true);
  });
});

type Mutation = {
  name: string;
  mutate: (d: Record<string, any>) => void;
  expectProblem: RegExp;
};

const MUTATIONS: Mutation[] = [
  {
    name: "missing id",
    mutate: (d) => delete d.id,
    expectProblem: /id must be a non-empty string/,
  },
  {
    name: "empty id",
    mutate: (d) => (d.id = ""),
    expectProblem: /id must be a non-empty string/,
  },
  {
    name: "unknown scenario",
    mutate: (d) => (d.scenario = "freestyle"),
    expectProblem: /scenario must be one of/,
  },
  {
    name: "non-string type label",
    mutate: (d) => (d.type_label = 7),
    expectProblem: /type_label must be a string/,
  },
  {
    name: "tools without targets",
    mutate: (d) => (d.tools = { distractors: [] }),
    expectProblem: /tools must be an object with a targets array/,
  },
  {
    name: "turns not an array",
    mutate: (d) => (d.turns = {}),
    expectProblem: /turns must be an array/,
  },
  {
    name: "turn with an unknown role",
    mutate: (d) => (d.turns[0].role = "system"),
    expectProblem: /turn 0: role must be one of user, assistant, tool/,
  },
  {
    name: "turn content not a string",
    mutate: (d) => (d.turns[0].content = null),
    expectProblem: /turn 0: content must be a string/,
  },
  {
    name: "action on a user turn",
    mutate: (d) => (d.turns[0].action = { kind: "answer", text: "hi" }),
    expectProblem: /turn 0: only assistant turns carry an action/,
  },
  {
    name: "action with an unknown kind",
    mutate: (d) => (d.turns[1].action.kind = "shout"),
    expectProblem: /turn 1: action kind must be ask, call, or answer/,
  },
  {
    name: "call action without calls",
    mutate: (d) => (d.turns[3].action.calls = []),
    expectProblem: /turn 3: a call action needs at least one tool call/,
  },
  {
    name: "call without a tool name",
    mutate: (d) => (d.turns[3].action.calls[0].name = ""),
    expectProblem: /turn 3, call 0: needs a non-empty tool name/,
  },
  {
    name: "call arguments not an object",
    mutate: (d) => (d.turns[3].action.calls[0].arguments = [1]),
    expectProblem: /turn 3, call 0: arguments must be an object/,
  },
  {
    name: "ask action without text",
    mutate: (d) => delete d.turns[1].action.text,
    expectProblem: /turn 1: an ask action needs non-empty text/,
  },
  {
    name: "tool output on an assistant turn",
    mutate: (d) => (d.turns[1].tool_output = "{}"),
    expectProblem: /turn 1: only tool turns carry a tool output/,
  },
  {
    name: "trajectory entry without a turn index",
    mutate: (d) => delete d.trajectory[0].turn,
    expectProblem: /trajectory entry 0: needs a numeric turn index/,
  },
  {
    name: "trajectory entry with a bad call",
    mutate: (d) => (d.trajectory[0].calls[0].arguments = "nope"),
    expectProblem: /trajectory entry 0, call 0: arguments must be an object/,
  },
  {
    name: "meta not an object",
    mutate: (d) => (d.meta = [1]),
    expectProblem: /meta must be an object/,
  },
];

describe("validateDialogue", () => {
  it("accepts the unmodified fixture", () => {
    expect(validateDialogue(validDialogue())).toEqual([]);
  });

  for (const { name, mutate, expectProblem } of MUTATIONS) {
    it(`flags ${name}`, () => {
      const dialogue = JSON.parse(serializeDialogue(validDialogue())) as Record<string, any>;
      mutate(dialogue);
      const problems = validateDialogue(dialogue);
      expect(problems.length).toBeGreaterThan(0);
      expect(problems.some((p) => expectProblem.test(p))).toBe(true);
    });
  }
});
