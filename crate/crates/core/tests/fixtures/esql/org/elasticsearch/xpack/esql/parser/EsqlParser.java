package org.elasticsearch.xpack.esql.parser;

import java.util.Map;

import org.elasticsearch.xpack.esql.plan.LogicalPlan;

public class EsqlParser {
    public LogicalPlan createStatement(String query, Map<String, Object> params) {
        String trimmed = query.trim();
        return new LogicalPlan(trimmed);
    }
}
