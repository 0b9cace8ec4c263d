import { describe, expect, it } from "vitest";

import { substituteNames } from "../src/api.js";

const names = ["age", "income", "debt_ratio"];

describe("substituteNames", () => {
    it("replaces feature tokens with column names", () => {
        expect(substituteNames("f1*f2", names)).toBe("age*income");
        expect(substituteNames("log(f3)", names)).toBe("log(debt_ratio)");
    });

    it("leaves out-of-range tokens untouched", () => {
        expect(substituteNames("f4+f1", names)).toBe("f4+age");
    });

    it("does not touch operator names or partial matches", () => {
        expect(substituteNames("sqrt(f2)/f1", names)).toBe("sqrt(income)/age");
        expect(substituteNames("af1", names)).toBe("af1");
    });
});
