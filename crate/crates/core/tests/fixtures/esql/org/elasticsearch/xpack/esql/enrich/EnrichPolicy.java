package org.elasticsearch.xpack.esql.enrich;

import java.util.List;

public class EnrichPolicy {
    private final String name;
    private final String matchField;
    private final List<String> enrichFields;

    public EnrichPolicy(String name, String matchField, List<String> enrichFields) {
        this.name = name;
        this.matchField = matchField;
        this.enrichFields = enrichFields;
    }

    public String name() {
        return name;
    }

    public String matchField() {
        return matchField;
    }
}
